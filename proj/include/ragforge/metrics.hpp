#pragma once

#include <fstream>
#include <mutex>
#include <string>

#include "ragforge/refresher.hpp"
#include "ragforge/trainer.hpp"

namespace ragforge {

// JSON Lines training log: one StepRecord, EvalReport or refresh event per
// line. Thread-safe; the async refresher reports from its worker thread.
// With zero_timings set, wall-clock fields are written as 0 so sync-mode
// runs produce byte-identical logs.
class MetricsLog {
public:
    MetricsLog(const std::string& path, bool zero_timings);

    void record_step(const StepRecord& record);
    void record_eval(const EvalReport& report);
    void record_refresh(const RefreshEvent& event);

    const std::string& path() const { return path_; }

private:
    void write_line(const std::string& line);

    std::string path_;
    bool zero_timings_;
    std::ofstream out_;
    std::mutex mu_;
};

}  // namespace ragforge
