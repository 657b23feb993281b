#include "ragforge/metrics.hpp"

#include <stdexcept>

#include <json.hpp>

namespace ragforge {

using nlohmann::json;

MetricsLog::MetricsLog(const std::string& path, bool zero_timings)
    : path_(path), zero_timings_(zero_timings), out_(path, std::ios::binary) {
    if (!out_) throw std::runtime_error("cannot open metrics log: " + path);
}

void MetricsLog::write_line(const std::string& line) {
    std::lock_guard lock(mu_);
    out_ << line << '\n';
    out_.flush();
    if (!out_) throw std::runtime_error("metrics log write failed: " + path_);
}

void MetricsLog::record_step(const StepRecord& record) {
    json obj = {
        {"type", "step"},
        {"step", record.step},
        {"loss", record.loss},
        {"generation", record.snapshot_generation_used},
        {"retrieved", record.retrieved},
        {"timing_ms", zero_timings_ ? 0.0 : record.timing_ms},
    };
    if (!record.gold_retrieved.empty()) obj["gold_retrieved"] = record.gold_retrieved;
    write_line(obj.dump());
}

void MetricsLog::record_eval(const EvalReport& report) {
    json obj = {
        {"type", "eval"},
        {"exact_match_percent", report.exact_match_percent},
        {"n_examples", report.n_examples},
        {"mode", report.mode},
        {"generation", report.snapshot_generation},
        {"k", report.k},
        {"nprobe", report.nprobe},
    };
    if (report.retrieval_recall_at_k) obj["recall_at_k"] = *report.retrieval_recall_at_k;
    write_line(obj.dump());
}

void MetricsLog::record_refresh(const RefreshEvent& event) {
    json obj = {
        {"type", "refresh"},
        {"step", event.step},
        {"generation", event.generation},
        {"capture_fingerprint", event.capture_fingerprint},
        {"reencode_ms", zero_timings_ ? 0.0 : event.reencode_ms},
        {"rebuild_ms", zero_timings_ ? 0.0 : event.rebuild_ms},
        {"skipped", event.skipped},
    };
    write_line(obj.dump());
}

}  // namespace ragforge
