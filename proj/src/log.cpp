#include "jolt/log.hpp"

#include <istream>
#include <ostream>

namespace jolt {

EventLog::EventLog(std::ostream* sink) : sink_(sink), start_(std::chrono::steady_clock::now()) {}

void EventLog::emit(const std::string& stage, const nlohmann::ordered_json& fields) {
    std::lock_guard lock(mu_);
    ++seq_;
    if (!sink_) return;
    nlohmann::ordered_json line;
    line["seq"] = seq_;
    line["wall_ms"] = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
    line["stage"] = stage;
    for (const auto& [k, v] : fields.items()) line[k] = v;
    *sink_ << line.dump() << '\n';
    sink_->flush();
}

std::vector<LossPoint> replay_losses(std::istream& log) {
    std::vector<LossPoint> out;
    std::string line;
    while (std::getline(log, line)) {
        const auto j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object() || j.value("stage", "") != "train_step") continue;
        out.push_back({j.at("step").get<std::uint64_t>(), j.at("l_sl").get<double>(), j.at("l_ntp").get<double>()});
    }
    return out;
}

}  // namespace jolt
