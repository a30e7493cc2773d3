#pragma once

#include "chewsense/features.hpp"
#include "chewsense/learn.hpp"
#include "chewsense/metrics.hpp"
#include "chewsense/realtime.hpp"
#include "chewsense/signal.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace chewsense::io {

inline constexpr std::string_view kRecordingMagic = "# chewsense recording v1";
inline constexpr std::string_view kModelMagic = "chewsense-model v1";

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);
/// Fixed-point with `digits` decimals.
std::string format_fixed(double v, int digits = 6);
double parse_double(std::string_view s, std::string_view what = "number");
std::vector<std::string_view> split(std::string_view s, char sep);

// --- recordings ---------------------------------------------------------

void write_recording(const RawRecording& rec, std::ostream& data, std::ostream& annotations);
RawRecording read_recording(std::istream& data, std::istream* annotations);

/// Annotations live next to the data file, at `<path>.ann`.
std::filesystem::path annotation_path(const std::filesystem::path& path);
void write_recording(const RawRecording& rec, const std::filesystem::path& path);
RawRecording read_recording(const std::filesystem::path& path);

void write_annotations(const std::vector<Annotation>& anns, std::ostream& out);
std::vector<Annotation> read_annotations(std::istream& in);

// --- models ---------------------------------------------------------------

/// 64-bit FNV-1a.
std::uint64_t checksum(std::string_view bytes);

std::string serialize_model(const learn::LinearModel& model);
learn::LinearModel parse_model(std::string_view text);
void save_model(const learn::LinearModel& model, const std::filesystem::path& path);
learn::LinearModel load_model(const std::filesystem::path& path);

// --- datasets -------------------------------------------------------------

void write_dataset(const features::FeatureMatrix& m, std::ostream& out);
features::FeatureMatrix read_dataset(std::istream& in);
void write_dataset(const features::FeatureMatrix& m, const std::filesystem::path& path);
features::FeatureMatrix read_dataset(const std::filesystem::path& path);

// --- event logs -------------------------------------------------------------

/// `event,onset_s,termination_s,duration_s`
std::string event_line(const ChewEvent& e);
void write_event_log(const std::vector<ChewEvent>& events, std::ostream& out);
std::vector<ChewEvent> read_event_log(std::istream& in);

void write_bursts(const std::vector<events::BurstInterval>& bursts, std::ostream& out);

// --- reports ----------------------------------------------------------------

/// key=value block followed by a CSV header and row.
void write_metrics_report(const metrics::SessionMetrics& m, std::ostream& out);

/// One row per fold plus an average row carrying the F1 standard deviation.
void write_eval_report(const learn::EvalReport& r, std::ostream& out);

}  // namespace chewsense::io
