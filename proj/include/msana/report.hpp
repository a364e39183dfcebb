#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "msana/pipeline.hpp"

namespace msana {

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

/// FNV-1a over the serialized document without its "timing" and
/// "determinism_hash" members.
inline std::uint64_t determinism_hash(json doc) {
  doc.erase("timing");
  doc.erase("determinism_hash");
  return fnv1a64(doc.dump());
}

inline json metrics_json(const Metrics& m) {
  return {{"accuracy", m.accuracy}, {"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}};
}

inline json timing_json(const RunOutput& r, std::size_t threads) {
  json breakdown = json::object();
  for (std::size_t i = 0; i < kComponentCount; ++i)
    breakdown[std::string(to_string(static_cast<Component>(i)))] = r.qos.breakdown_ms[i];
  return {{"mean_latency_ms", r.qos.mean_latency_ms},
          {"throughput_sps", r.qos.throughput_sps},
          {"wall_seconds", r.result.wall_seconds},
          {"timed_samples", r.qos.timed_samples},
          {"threads", threads},
          {"breakdown_ms", breakdown}};
}

inline json results_json(const RunOutput& r, const PipelineConfig& c) {
  json j;
  j["method"] = r.method;
  j["seed"] = c.seed;
  j["source"] = std::string(to_string(c.source));
  j["samples"] = {{"train", r.train_size}, {"evaluated", r.result.counts.total()}};
  j["features"] = r.dim;
  j["metrics"] = metrics_json(r.metrics);
  const auto& cc = r.result.counts;
  j["confusion"] = {{"tp", cc.tp(1)}, {"fp", cc.fp(1)}, {"fn", cc.fn(1)}, {"tn", cc.tn(1)}};
  j["final_window"] = {{"size", std::min<std::size_t>(c.final_window, r.result.predictions.size())},
                       {"accuracy", r.result.tail_accuracy(c.final_window)}};
  j["summary"] = r.summary;
  json counts = {{"drift", 0}, {"reselect", 0}, {"refit_fs", 0}, {"retrain", 0}};
  for (const auto& e : r.events) counts[e.type] = counts[e.type].get<std::uint64_t>() + 1;
  j["event_counts"] = counts;
  j["warnings"] = r.warnings.all();
  j["state_hash"] = hex64(r.state_hash);
  j["fault"] = r.result.fault ? json(*r.result.fault) : json(nullptr);
  json cfg = json::object();
  for (const auto& [k, v] : config_entries(c))
    if (k != "threads") cfg[k] = v;
  j["config"] = cfg;
  j["timing"] = timing_json(r, c.threads);
  j["determinism_hash"] = hex64(determinism_hash(j));
  return j;
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw StreamError("cannot write " + p.string());
  out << text;
  if (!out) throw StreamError("failed writing " + p.string());
}

inline std::string curve_csv(const PrequentialResult& r) {
  std::ostringstream os;
  os << "index,accuracy\n" << std::setprecision(10);
  for (const auto& p : r.curve) os << p.index << ',' << p.accuracy << '\n';
  return os.str();
}

inline std::string latency_pdf_csv(const QosReport& q) {
  std::ostringstream os;
  os << "bin_start_ms,bin_end_ms,count,density\n" << std::setprecision(10);
  for (const auto& b : q.latency_pdf) os << b.lo_ms << ',' << b.hi_ms << ',' << b.count << ',' << b.density << '\n';
  return os.str();
}

inline std::string breakdown_csv(const QosReport& q) {
  std::ostringstream os;
  os << "component,mean_ms\n" << std::setprecision(10);
  for (std::size_t i = 0; i < kComponentCount; ++i)
    os << to_string(static_cast<Component>(i)) << ',' << q.breakdown_ms[i] << '\n';
  os << "total," << q.mean_latency_ms << '\n';
  return os.str();
}

inline std::string events_jsonl(const std::vector<Event>& events) {
  std::string out;
  for (const auto& e : events) {
    json j = {{"index", e.index}, {"event", e.type}, {"payload", e.payload}};
    out += j.dump() + "\n";
  }
  return out;
}

inline std::string masks_csv(const std::vector<FeatureMask>& masks) {
  std::ostringstream os;
  os << "fitted_at,selected\n";
  for (const auto& m : masks) {
    os << m.fitted_at << ",\"";
    for (std::size_t i = 0; i < m.selected.size(); ++i) os << (i ? " " : "") << m.selected[i];
    os << "\"\n";
  }
  return os.str();
}

/// Writes results.json, curve.csv, latency_pdf.csv, breakdown.csv,
/// events.jsonl and masks.csv into `dir`. Returns the results document.
inline json write_run_outputs(const std::filesystem::path& dir, const RunOutput& r, const PipelineConfig& c) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw StreamError("cannot create output directory " + dir.string() + ": " + ec.message());
  const json doc = results_json(r, c);
  write_text(dir / "results.json", doc.dump(2) + "\n");
  write_text(dir / "curve.csv", curve_csv(r.result));
  write_text(dir / "latency_pdf.csv", latency_pdf_csv(r.qos));
  write_text(dir / "breakdown.csv", breakdown_csv(r.qos));
  write_text(dir / "events.jsonl", events_jsonl(r.events));
  write_text(dir / "masks.csv", masks_csv(r.masks));
  return doc;
}

struct CompareRow {
  std::string method;
  Metrics metrics;
  double mean_latency_ms = 0.0;
  double throughput_sps = 0.0;
};

inline std::string compare_csv(const std::vector<CompareRow>& rows) {
  std::ostringstream os;
  os << "method,accuracy,precision,recall,f1,mean_latency_ms,throughput_sps\n" << std::setprecision(10);
  for (const auto& r : rows)
    os << r.method << ',' << r.metrics.accuracy << ',' << r.metrics.precision << ',' << r.metrics.recall << ','
       << r.metrics.f1 << ',' << r.mean_latency_ms << ',' << r.throughput_sps << '\n';
  return os.str();
}

inline std::string compare_table(const std::vector<CompareRow>& rows) {
  std::ostringstream os;
  std::size_t w = 6;
  for (const auto& r : rows) w = std::max(w, r.method.size());
  os << std::left << std::setw(static_cast<int>(w)) << "method" << std::right << std::setw(10) << "acc(%)"
     << std::setw(10) << "prec(%)" << std::setw(10) << "rec(%)" << std::setw(10) << "f1(%)" << std::setw(13)
     << "latency(ms)" << std::setw(14) << "throughput/s" << '\n';
  os << std::fixed;
  for (const auto& r : rows) {
    os << std::left << std::setw(static_cast<int>(w)) << r.method << std::right << std::setprecision(2)
       << std::setw(10) << 100.0 * r.metrics.accuracy << std::setw(10) << 100.0 * r.metrics.precision << std::setw(10)
       << 100.0 * r.metrics.recall << std::setw(10) << 100.0 * r.metrics.f1 << std::setprecision(4) << std::setw(13)
       << r.mean_latency_ms << std::setprecision(1) << std::setw(14) << r.throughput_sps << '\n';
  }
  return os.str();
}

}  // namespace msana
