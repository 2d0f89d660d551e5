// Live negotiation sessions: a transport-independent message engine. A real
// human replaces the simulated human's offer policy; the automation answers
// each offer with the same Zeuthen rule used in batch negotiation.
//
// Every outbound message carries the session id and a per-session sequence
// number. Given the same inbound messages the engine emits identical
// outbound messages.

#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "cooptraj/agreement.hpp"
#include "cooptraj/execution.hpp"
#include "cooptraj/harness.hpp"
#include "cooptraj/json_io.hpp"
#include "cooptraj/scenario.hpp"

namespace cooptraj {

inline constexpr int kProtocolVersion = 1;

enum class Phase { Configuring, Negotiating, Agreed, Executing, Done };

inline const char* to_string(Phase p) noexcept {
    switch (p) {
        case Phase::Configuring: return "configuring";
        case Phase::Negotiating: return "negotiating";
        case Phase::Agreed: return "agreed";
        case Phase::Executing: return "executing";
        case Phase::Done: return "done";
    }
    return "done";
}

struct SessionOptions {
    double idle_timeout{300.0};   // seconds without a human message while negotiating
    double resume_window{60.0};   // seconds a detached session stays resumable
    bool reveal_desire{true};     // echo the automation's desire with the scenario
};

namespace protocol {

inline Json message(const std::string& type, const std::string& session, std::uint64_t seq) {
    Json j;
    j["type"] = type;
    j["session"] = session;
    j["seq"] = seq;
    return j;
}

inline Json error(const std::string& session, std::uint64_t seq, const std::string& code, const std::string& detail) {
    Json j = message("error", session, seq);
    j["code"] = code;
    j["detail"] = detail;
    return j;
}

}  // namespace protocol

class Session {
public:
    Session(std::string id, Scenario scenario, SessionOptions options)
        : id_(std::move(id)), scenario_(std::move(scenario)), options_(options),
          config_(std::get<Agreement>(scenario_.arbitration).config),
          space_{scenario_.start, scenario_.sim.dt, scenario_.horizon_samples()},
          automation_(agent_from_cost(scenario_.automation_cost, space_, config_.automation_compliance)) {}

    [[nodiscard]] const std::string& id() const noexcept { return id_; }
    [[nodiscard]] Phase phase() const noexcept { return phase_; }
    [[nodiscard]] const Scenario& scenario() const noexcept { return scenario_; }
    [[nodiscard]] const std::shared_ptr<const Trajectory>& joint() const noexcept { return joint_; }
    [[nodiscard]] const std::vector<Json>& outbox() const noexcept { return log_; }
    [[nodiscard]] std::uint64_t acknowledged() const noexcept { return acked_; }
    [[nodiscard]] double last_activity() const noexcept { return last_activity_; }
    [[nodiscard]] const std::vector<NegotiationRound>& rounds() const noexcept { return rounds_; }
    [[nodiscard]] const Theta& automation_desire() const noexcept { return automation_.desire; }

    /// Messages announcing the session (hello + scenario echo).
    std::vector<Json> open(double now) {
        last_activity_ = now;
        std::vector<Json> out;
        Json hello = next("hello");
        hello["version"] = kProtocolVersion;
        out.push_back(emit(std::move(hello)));
        Json echo = next("scenario");
        echo["scenario"] = to_json(scenario_);
        if (options_.reveal_desire) {
            echo["automation_desire"] = Json{{"theta", to_json(automation_.desire)},
                                             {"trajectory", to_json(space_.trajectory(automation_.desire))}};
        }
        out.push_back(emit(std::move(echo)));
        return out;
    }

    /// Handles one inbound message addressed to this session.
    std::vector<Json> handle(const Json& msg, double now) {
        const auto type = msg.value("type", std::string());
        if (msg.contains("seq")) {
            if (!msg["seq"].is_number_integer() || msg["seq"].get<std::int64_t>() < 0) {
                return {fail("malformed", "seq must be a non-negative integer")};
            }
            const auto seq = msg["seq"].get<std::uint64_t>();
            if (type != "ack" && type != "resume") {
                if (seq <= inbound_seq_) return {fail("bad_sequence", "client sequence numbers must increase")};
                inbound_seq_ = seq;
            }
        }
        if (type == "human_offer") {
            last_activity_ = now;
            return human_offer(msg);
        }
        if (type == "accept") {
            last_activity_ = now;
            return accept();
        }
        if (type == "execute") return execute();
        if (type == "ack") {
            acked_ = std::max(acked_, msg.value("ack", std::uint64_t{0}));
            return {};
        }
        if (type == "resume") return replay(msg.value("last_seq", std::uint64_t{0}));
        return {fail("unknown_type", "unknown message type '" + type + "'")};
    }

    /// All logged outbound messages after `last_seq`.
    [[nodiscard]] std::vector<Json> replay(std::uint64_t last_seq) const {
        std::vector<Json> out;
        for (const auto& m : log_) {
            if (m["seq"].get<std::uint64_t>() > last_seq) out.push_back(m);
        }
        return out;
    }

    /// Ends an idle negotiation; returns the terminal message if it fired.
    std::optional<Json> expire_if_idle(double now) {
        if ((phase_ == Phase::Configuring || phase_ == Phase::Negotiating) &&
            now - last_activity_ > options_.idle_timeout) {
            phase_ = Phase::Done;
            Json e = protocol::error(id_, ++seq_, "timeout", "no human response within the idle window");
            e["verdict"] = "exhausted";
            return emit(std::move(e));
        }
        return std::nullopt;
    }

    /// Execution trace of the agreed joint trajectory (both agents track it).
    [[nodiscard]] ExecutionTrace execution_trace() const {
        if (!joint_) throw InvalidArgument("session: no agreed joint trajectory");
        const Controller human(scenario_.sim.gains_H, joint_, scenario_.sim.u_max);
        const Controller automation(scenario_.sim.gains_A, joint_, scenario_.sim.u_max);
        return simulate(Plant{{scenario_.start.p, scenario_.start.v}, scenario_.sim.dt_sim}, human, automation,
                        scenario_.sim.duration);
    }

private:
    Json next(const std::string& type) { return protocol::message(type, id_, ++seq_); }

    Json emit(Json m) {
        log_.push_back(m);
        return m;
    }

    Json fail(const std::string& code, const std::string& detail) {
        return emit(protocol::error(id_, ++seq_, code, detail));
    }

    std::vector<Json> human_offer(const Json& msg) {
        if (phase_ != Phase::Configuring && phase_ != Phase::Negotiating) {
            return {fail("out_of_phase", std::string("human_offer not allowed in phase ") + to_string(phase_))};
        }
        Theta offer;
        try {
            if (msg.contains("theta")) {
                offer = theta_from_json(msg["theta"]);
            } else if (msg.contains("drag")) {
                // goal-only drag keeps the previous duration
                offer.goal = vec2_from_json(msg["drag"].at("goal"), "goal");
                offer.duration = protocol_ ? protocol_->offer_H().duration : scenario_.human.desired_duration;
                if (!offer.goal.finite()) throw SchemaError("drag: goal must be finite");
            } else {
                throw SchemaError("human_offer: expected theta or drag");
            }
        } catch (const std::exception& e) {
            return {fail("malformed", e.what())};
        }

        if (!protocol_) {
            // the human's first offer is taken as its revealed desire
            NegotiationAgent human{offer, scenario_.human.compliance, nullptr};
            auto reference = std::make_shared<const Trajectory>(space_.trajectory(offer));
            human.cost = [reference](const Trajectory& t) {
                return distance(t, *reference, MetricKind::MeanSquaredDistance).value;
            };
            protocol_.emplace(std::move(human), automation_, space_, config_);
            phase_ = Phase::Negotiating;
        }

        auto [record, accepted] = protocol_->respond_to(offer);
        rounds_.push_back(record);
        if (accepted) return {agree(offer)};
        if (protocol_->rounds_played() >= config_.max_rounds) {
            if (config_.fallback == Fallback::Midpoint) return {agree(midpoint(offer, protocol_->offer_A()))};
            phase_ = Phase::Done;
            Json e = protocol::error(id_, ++seq_, "exhausted", "max_rounds reached without agreement");
            e["verdict"] = "exhausted";
            return {emit(std::move(e))};
        }
        Json counter = next("automation_counter");
        counter["round"] = record.round;
        counter["theta"] = to_json(protocol_->offer_A());
        counter["trajectory"] = to_json(space_.trajectory(protocol_->offer_A()));
        counter["utility"] = automation_.utility(space_, protocol_->offer_A());
        counter["utility_of_human_offer"] = record.u_AH;
        counter["risk"] = record.risk_A;
        counter["action"] = record.action;
        return {emit(std::move(counter))};
    }

    std::vector<Json> accept() {
        if (phase_ != Phase::Negotiating) {
            return {fail("out_of_phase", std::string("accept not allowed in phase ") + to_string(phase_))};
        }
        return {agree(protocol_->offer_A())};
    }

    Json agree(const Theta& theta) {
        joint_ = std::make_shared<const Trajectory>(space_.trajectory(theta));
        phase_ = Phase::Agreed;
        Json m = next("agreed");
        m["theta"] = to_json(theta);
        m["joint"] = to_json(*joint_);
        return emit(std::move(m));
    }

    std::vector<Json> execute() {
        if (phase_ != Phase::Agreed || !joint_) {
            return {fail("out_of_phase", std::string("execute not allowed in phase ") + to_string(phase_))};
        }
        phase_ = Phase::Executing;
        const ExecutionTrace trace = execution_trace();
        std::vector<Json> out;
        out.reserve(trace.ticks.size());
        for (std::size_t i = 0; i < trace.ticks.size(); ++i) {
            Json m = next("execution_tick");
            const Json tick = to_json(trace.ticks[i]);
            for (const auto& [k, v] : tick.items()) m[k] = v;
            m["final"] = i + 1 == trace.ticks.size();
            out.push_back(emit(std::move(m)));
        }
        phase_ = Phase::Done;
        return out;
    }

    std::string id_;
    Scenario scenario_;
    SessionOptions options_;
    AgreementConfig config_;
    OfferSpace space_;
    NegotiationAgent automation_;
    std::optional<ZeuthenProtocol> protocol_;
    std::vector<NegotiationRound> rounds_;
    Phase phase_{Phase::Configuring};
    std::shared_ptr<const Trajectory> joint_;
    std::vector<Json> log_;
    std::uint64_t seq_{0};
    std::uint64_t inbound_seq_{0};
    std::uint64_t acked_{0};
    double last_activity_{0.0};
};

/// Routes messages to sessions. Each session is serialized by its own mutex;
/// sessions share no mutable state.
class SessionManager {
public:
    explicit SessionManager(SessionOptions options = {}) : options_(options) {}

    /// Handles one inbound message (already parsed). `now` is a monotonic
    /// clock in seconds, used only for idle and resume bookkeeping.
    std::vector<Json> dispatch(const Json& msg, double now) {
        if (!msg.is_object() || !msg.contains("type") || !msg["type"].is_string()) {
            return {protocol::error("", 0, "malformed", "message must be an object with a string 'type'")};
        }
        const auto type = msg["type"].get<std::string>();
        if (type == "hello") {
            const int requested = msg.value("version", kProtocolVersion);
            Json reply = protocol::message("hello", msg.value("session", std::string()), 0);
            reply["version"] = std::min(requested, kProtocolVersion);
            return {reply};
        }
        if (type == "scenario") return open_session(msg.contains("scenario") ? msg["scenario"] : Json(), now);

        const auto id = msg.value("session", std::string());
        auto entry = find(id);
        if (!entry) return {protocol::error(id, 0, "unknown_session", "no session '" + id + "'")};
        std::lock_guard lock(entry->mutex);
        entry->detached_since.reset();
        return entry->session.handle(msg, now);
    }

    /// Validates the scenario and creates a session in the configuring phase.
    std::vector<Json> open_session(const Json& scenario_json, double now) {
        Scenario scenario;
        try {
            scenario = scenario_from_json(scenario_json);
            scenario.validate();
        } catch (const std::exception& e) {
            return {protocol::error("", 0, "invalid_scenario", e.what())};
        }
        const auto* agreement = std::get_if<Agreement>(&scenario.arbitration);
        if (!agreement || agreement->config.scheme != AgreementScheme::Negotiation) {
            return {protocol::error("", 0, "requires_negotiation",
                                    "live sessions require an agreement policy with the negotiation scheme")};
        }
        std::shared_ptr<Entry> entry;
        {
            std::lock_guard lock(mutex_);
            const std::string id = "s" + std::to_string(++counter_);
            entry = std::make_shared<Entry>(Session(id, std::move(scenario), options_));
            sessions_.emplace(id, entry);
        }
        std::lock_guard lock(entry->mutex);
        return entry->session.open(now);
    }

    void detach(const std::string& id, double now) {
        if (auto e = find(id)) {
            std::lock_guard lock(e->mutex);
            e->detached_since = now;
        }
    }

    /// Times out idle negotiations and discards sessions detached for longer
    /// than the resume window. Returns messages produced by timeouts.
    std::vector<Json> reap(double now) {
        std::vector<std::pair<std::string, std::shared_ptr<Entry>>> entries;
        {
            std::lock_guard lock(mutex_);
            entries.assign(sessions_.begin(), sessions_.end());
        }
        const auto expired = [&](const Entry& e) {
            return e.detached_since && now - *e.detached_since > options_.resume_window;
        };
        std::vector<Json> out;
        bool any_expired = false;
        for (const auto& [id, entry] : entries) {
            std::lock_guard lock(entry->mutex);
            if (auto m = entry->session.expire_if_idle(now)) out.push_back(std::move(*m));
            any_expired = any_expired || expired(*entry);
        }
        if (!any_expired) return out;
        // lock order is always manager, then entry; `entries` keeps erased entries alive
        std::lock_guard lock(mutex_);
        for (const auto& [id, entry] : entries) {
            std::unique_lock entry_lock(entry->mutex);
            const bool drop = expired(*entry);
            entry_lock.unlock();
            if (drop) {
                auto it = sessions_.find(id);
                if (it != sessions_.end() && it->second == entry) sessions_.erase(it);
            }
        }
        return out;
    }

    /// Runs `fn` on a session under its lock; false if the session is gone.
    template <typename Fn>
    bool with_session(const std::string& id, Fn&& fn) {
        auto e = find(id);
        if (!e) return false;
        std::lock_guard lock(e->mutex);
        fn(e->session);
        return true;
    }

    [[nodiscard]] std::size_t size() const {
        std::lock_guard lock(mutex_);
        return sessions_.size();
    }

private:
    struct Entry {
        explicit Entry(Session s) : session(std::move(s)) {}
        std::mutex mutex;
        Session session;
        std::optional<double> detached_since;
    };

    std::shared_ptr<Entry> find(const std::string& id) {
        std::lock_guard lock(mutex_);
        auto it = sessions_.find(id);
        return it == sessions_.end() ? nullptr : it->second;
    }

    SessionOptions options_;
    mutable std::mutex mutex_;
    std::map<std::string, std::shared_ptr<Entry>> sessions_;
    std::uint64_t counter_{0};
};

}  // namespace cooptraj
