// WebSocket + static HTTP transport for live sessions. One port serves both:
// upgrade requests become protocol connections, plain GETs are answered from
// the static directory.

#pragma once

#include <algorithm>
#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <chrono>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <list>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <thread>

#include "cooptraj/session.hpp"

namespace cooptraj {

struct ServerOptions {
    std::string address{"127.0.0.1"};
    unsigned short port{0};  // 0 picks a free port
    std::filesystem::path static_dir;
    double real_time_factor{0.0};  // >0 paces execution ticks; 0 sends them as fast as possible
    double reap_interval{1.0};
    unsigned threads{2};
};

/// Seconds on a steady clock; the default session clock.
inline double monotonic_seconds() {
    using namespace std::chrono;
    return duration<double>(steady_clock::now().time_since_epoch()).count();
}

namespace detail {

namespace beast = boost::beast;
namespace http = boost::beast::http;
namespace net = boost::asio;
using tcp = net::ip::tcp;

inline std::string content_type(const std::string& path) {
    const auto ext = std::filesystem::path(path).extension().string();
    if (ext == ".html") return "text/html; charset=utf-8";
    if (ext == ".js") return "text/javascript; charset=utf-8";
    if (ext == ".css") return "text/css; charset=utf-8";
    if (ext == ".json") return "application/json";
    return "application/octet-stream";
}

inline http::response<http::string_body> static_response(const http::request<http::string_body>& req,
                                                         const std::filesystem::path& static_dir) {
    http::response<http::string_body> res;
    res.version(req.version());
    res.keep_alive(false);
    std::string target(req.target());
    if (const auto q = target.find('?'); q != std::string::npos) target.resize(q);
    if (target.empty() || target.back() == '/') target += "index.html";
    const bool traversal = target.find("..") != std::string::npos || target.front() != '/';
    std::ifstream in;
    if (!static_dir.empty() && !traversal && req.method() == http::verb::get) {
        const auto path = static_dir / target.substr(1);
        if (std::filesystem::is_regular_file(path)) in.open(path, std::ios::binary);
    }
    if (!in.is_open() || !in) {
        res.result(http::status::not_found);
        res.set(http::field::content_type, "text/plain");
        res.body() = "not found\n";
    } else {
        std::ostringstream body;
        body << in.rdbuf();
        res.result(http::status::ok);
        res.set(http::field::content_type, content_type(target));
        res.body() = body.str();
    }
    res.prepare_payload();
    return res;
}

struct ServerContext {
    SessionManager& manager;
    ServerOptions options;
    std::function<double()> clock;
};

/// One protocol connection. Its state is only touched on the connection's strand.
class WsConnection : public std::enable_shared_from_this<WsConnection> {
public:
    WsConnection(tcp::socket socket, ServerContext& ctx)
        : ws_(std::move(socket)), timer_(ws_.get_executor()), ctx_(ctx) {}

    void start(http::request<http::string_body> req) {
        ws_.set_option(beast::websocket::stream_base::timeout::suggested(beast::role_type::server));
        ws_.text(true);
        ws_.async_accept(req, [self = shared_from_this()](beast::error_code ec) {
            if (!ec) self->read();
        });
    }

    /// Queues a message that no client request produced (timeouts).
    void push(Json m) {
        net::post(ws_.get_executor(), [self = shared_from_this(), m = std::move(m)] {
            if (self->sessions_.count(m.value("session", std::string()))) self->enqueue({m});
        });
    }

private:
    struct Outgoing {
        std::string text;
        double pause_after;
    };

    void read() {
        ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
            if (ec) return self->closed();
            const auto text = beast::buffers_to_string(self->buffer_.data());
            self->buffer_.consume(self->buffer_.size());
            self->on_message(text);
            self->read();
        });
    }

    void on_message(const std::string& text) {
        std::vector<Json> replies;
        Json msg;
        try {
            msg = Json::parse(text);
        } catch (const std::exception& e) {
            replies.push_back(protocol::error("", 0, "malformed", e.what()));
        }
        if (replies.empty()) replies = ctx_.manager.dispatch(msg, ctx_.clock());
        for (const auto& r : replies) {
            const auto id = r.value("session", std::string());
            if (!id.empty()) sessions_.insert(id);
        }
        enqueue(replies);
    }

    void enqueue(const std::vector<Json>& messages) {
        const bool idle = queue_.empty();
        for (const auto& m : messages) {
            double pause = 0.0;
            if (ctx_.options.real_time_factor > 0.0 && m.value("type", std::string()) == "execution_tick" &&
                !m.value("final", false)) {
                double dt_sim = 0.01;
                ctx_.manager.with_session(m["session"].get<std::string>(),
                                          [&](const Session& s) { dt_sim = s.scenario().sim.dt_sim; });
                pause = dt_sim / ctx_.options.real_time_factor;
            }
            queue_.push_back({dump(m), pause});
        }
        if (idle && !queue_.empty()) write();
    }

    void write() {
        ws_.async_write(net::buffer(queue_.front().text), [self = shared_from_this()](beast::error_code ec, std::size_t) {
            if (ec) return;
            const double pause = self->queue_.front().pause_after;
            self->queue_.pop_front();
            if (self->queue_.empty()) return;
            if (pause <= 0.0) return self->write();
            self->timer_.expires_after(std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                std::chrono::duration<double>(pause)));
            self->timer_.async_wait([self](beast::error_code wait_ec) {
                if (!wait_ec) self->write();
            });
        });
    }

    void closed() {
        timer_.cancel();
        const double now = ctx_.clock();
        for (const auto& id : sessions_) ctx_.manager.detach(id, now);
    }

    beast::websocket::stream<beast::tcp_stream> ws_;
    net::steady_timer timer_;
    ServerContext& ctx_;
    beast::flat_buffer buffer_;
    std::deque<Outgoing> queue_;
    std::set<std::string> sessions_;
};

/// Reads one HTTP request, then upgrades it or answers from the static directory.
class HttpConnection : public std::enable_shared_from_this<HttpConnection> {
public:
    using Registry = std::function<void(const std::shared_ptr<WsConnection>&)>;

    HttpConnection(tcp::socket socket, ServerContext& ctx, Registry registry)
        : stream_(std::move(socket)), ctx_(ctx), registry_(std::move(registry)) {}

    void start() {
        stream_.expires_after(std::chrono::seconds(30));
        http::async_read(stream_, buffer_, req_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
            if (!ec) self->on_request();
        });
    }

private:
    void on_request() {
        if (beast::websocket::is_upgrade(req_)) {
            stream_.expires_never();
            auto ws = std::make_shared<WsConnection>(stream_.release_socket(), ctx_);
            registry_(ws);
            ws->start(std::move(req_));
            return;
        }
        res_ = static_response(req_, ctx_.options.static_dir);
        http::async_write(stream_, res_, [self = shared_from_this()](beast::error_code, std::size_t) {
            beast::error_code ec;
            self->stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
        });
    }

    beast::tcp_stream stream_;
    ServerContext& ctx_;
    Registry registry_;
    beast::flat_buffer buffer_;
    http::request<http::string_body> req_;
    http::response<http::string_body> res_;
};

}  // namespace detail

class SessionServer {
public:
    using Clock = std::function<double()>;

    SessionServer(SessionManager& manager, ServerOptions options, Clock clock = monotonic_seconds)
        : ctx_{manager, std::move(options), std::move(clock)} {}

    SessionServer(const SessionServer&) = delete;
    SessionServer& operator=(const SessionServer&) = delete;
    ~SessionServer() { stop(); }

    /// Binds and starts serving on background threads. Returns the bound port.
    unsigned short start() {
        namespace net = boost::asio;
        const detail::tcp::endpoint endpoint(net::ip::make_address(ctx_.options.address), ctx_.options.port);
        acceptor_.open(endpoint.protocol());
        acceptor_.set_option(net::socket_base::reuse_address(true));
        acceptor_.bind(endpoint);
        acceptor_.listen();
        port_ = acceptor_.local_endpoint().port();
        accept();
        schedule_reap();
        for (unsigned i = 0; i < std::max(1u, ctx_.options.threads); ++i) threads_.emplace_back([this] { io_.run(); });
        return port_;
    }

    void stop() {
        if (threads_.empty()) return;
        io_.stop();
        for (auto& t : threads_) t.join();
        threads_.clear();
    }

    [[nodiscard]] unsigned short port() const noexcept { return port_; }

private:
    void accept() {
        acceptor_.async_accept(boost::asio::make_strand(io_), [this](boost::system::error_code ec, detail::tcp::socket s) {
            if (ec == boost::asio::error::operation_aborted) return;
            if (!ec) {
                std::make_shared<detail::HttpConnection>(std::move(s), ctx_, [this](const auto& ws) {
                    std::lock_guard lock(mutex_);
                    connections_.remove_if([](const auto& w) { return w.expired(); });
                    connections_.push_back(ws);
                })->start();
            }
            accept();
        });
    }

    void schedule_reap() {
        reap_timer_.expires_after(std::chrono::duration_cast<std::chrono::steady_clock::duration>(
            std::chrono::duration<double>(ctx_.options.reap_interval)));
        reap_timer_.async_wait([this](boost::system::error_code ec) {
            if (ec) return;
            for (auto& m : ctx_.manager.reap(ctx_.clock())) deliver(m);
            schedule_reap();
        });
    }

    // Timeout messages go to every live connection attached to the session.
    void deliver(const Json& m) {
        std::lock_guard lock(mutex_);
        for (const auto& w : connections_) {
            if (auto c = w.lock()) c->push(m);
        }
    }

    detail::ServerContext ctx_;
    boost::asio::io_context io_;
    detail::tcp::acceptor acceptor_{boost::asio::make_strand(io_)};
    boost::asio::steady_timer reap_timer_{boost::asio::make_strand(io_)};
    unsigned short port_{0};
    std::vector<std::thread> threads_;
    std::mutex mutex_;
    std::list<std::weak_ptr<detail::WsConnection>> connections_;
};

}  // namespace cooptraj
