#pragma once

#include <chrono>
#include <cstdint>
#include <iosfwd>
#include <mutex>
#include <string>
#include <vector>

#include "json.hpp"

namespace jolt {

/// One JSON object per line: {"seq", "wall_ms", "stage", ...fields}. `seq`
/// increases by one per event; wall_ms counts from construction.
class EventLog {
public:
    /// Null sink discards events but still counts them.
    explicit EventLog(std::ostream* sink = nullptr);

    void emit(const std::string& stage, const nlohmann::ordered_json& fields = nlohmann::ordered_json::object());
    std::uint64_t count() const noexcept { return seq_; }

private:
    std::ostream* sink_;
    std::chrono::steady_clock::time_point start_;
    std::uint64_t seq_ = 0;
    std::mutex mu_;
};

struct LossPoint {
    std::uint64_t step = 0;
    double l_sl = 0;
    double l_ntp = 0;
};

/// Loss curve from the train_step events of a log stream; other lines are skipped.
std::vector<LossPoint> replay_losses(std::istream& log);

}  // namespace jolt
