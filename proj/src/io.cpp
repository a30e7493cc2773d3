#include "chewsense/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

namespace chewsense::io {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string format_fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

double parse_double(std::string_view s, std::string_view what) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw FormatError("invalid " + std::string(what) + " '" + std::string(s) + "'");
  }
  return v;
}

namespace {

long long parse_int(std::string_view s, std::string_view what) {
  long long v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw FormatError("invalid " + std::string(what) + " '" + std::string(s) + "'");
  }
  return v;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.remove_suffix(1);
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  return s;
}

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw Error("cannot open '" + p.string() + "' for writing");
  return f;
}

std::ifstream open_in(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw Error("cannot open '" + p.string() + "'");
  return f;
}

}  // namespace

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

// --- recordings ---------------------------------------------------------

void write_annotations(const std::vector<Annotation>& anns, std::ostream& out) {
  out << "kind,onset_s,termination_s\n";
  for (const auto& a : anns) {
    out << to_string(a.kind) << ',' << format_double(a.span.onset) << ','
        << format_double(a.span.termination) << '\n';
  }
}

std::vector<Annotation> read_annotations(std::istream& in) {
  std::vector<Annotation> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = trim(line);
    if (t.empty()) continue;
    if (lineno == 1 && t == "kind,onset_s,termination_s") continue;
    const auto f = split(t, ',');
    if (f.size() != 3) {
      throw FormatError("annotations line " + std::to_string(lineno) + ": expected 3 fields");
    }
    try {
      out.push_back({parse_annotation_kind(f[0]),
                     {parse_double(f[1], "onset"), parse_double(f[2], "termination")}});
    } catch (const FormatError& e) {
      throw FormatError("annotations line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void write_recording(const RawRecording& rec, std::ostream& data, std::ostream& annotations) {
  rec.validate();
  data << kRecordingMagic << '\n'
       << "# sample_rate=" << format_double(rec.sample_rate) << '\n'
       << "# channels=masseter,submental\n"
       << "# participant=" << rec.participant_id << '\n'
       << "# samples=" << rec.size() << '\n'
       << "timestamp_us,masseter,submental\n";
  const auto& m = rec.channel(Channel::Masseter);
  const auto& s = rec.channel(Channel::Submental);
  std::string row;
  for (Eigen::Index i = 0; i < rec.size(); ++i) {
    row.clear();
    row += std::to_string(std::llround(static_cast<double>(i) * 1e6 / rec.sample_rate));
    row += ',';
    row += format_double(m[i]);
    row += ',';
    row += format_double(s[i]);
    row += '\n';
    data << row;
  }
  write_annotations(rec.annotations, annotations);
}

RawRecording read_recording(std::istream& data, std::istream* annotations) {
  RawRecording rec;
  std::string line;
  std::size_t lineno = 0;
  long long declared = -1;
  bool have_rate = false, have_columns = false;

  if (!std::getline(data, line) || trim(line) != kRecordingMagic) {
    throw FormatError("recording: missing or unsupported header (expected '" +
                      std::string(kRecordingMagic) + "')");
  }
  ++lineno;
  while (std::getline(data, line)) {
    ++lineno;
    const auto t = trim(line);
    if (t.starts_with("# ")) {
      const auto kv = t.substr(2);
      const auto eq = kv.find('=');
      if (eq == std::string_view::npos) continue;
      const auto key = kv.substr(0, eq), val = kv.substr(eq + 1);
      if (key == "sample_rate") {
        rec.sample_rate = parse_double(val, "sample_rate");
        have_rate = true;
      } else if (key == "participant") {
        rec.participant_id = std::string(val);
      } else if (key == "samples") {
        declared = parse_int(val, "sample count");
      } else if (key == "channels" && val != "masseter,submental") {
        throw FormatError("recording: unsupported channel layout '" + std::string(val) + "'");
      }
      continue;
    }
    if (t != "timestamp_us,masseter,submental") {
      throw FormatError("recording line " + std::to_string(lineno) + ": expected column header");
    }
    have_columns = true;
    break;
  }
  if (!have_rate || !have_columns) throw FormatError("recording: incomplete header");

  std::vector<double> m, s;
  if (declared > 0) {
    m.reserve(static_cast<std::size_t>(declared));
    s.reserve(static_cast<std::size_t>(declared));
  }
  long long prev_ts = -1;
  std::size_t last_good = lineno;
  while (std::getline(data, line)) {
    ++lineno;
    const auto t = trim(line);
    if (t.empty()) continue;
    const auto f = split(t, ',');
    const std::string where = "recording line " + std::to_string(lineno);
    if (f.size() != 3) {
      throw FormatError(where + ": malformed row (last good line " + std::to_string(last_good) + ")");
    }
    long long ts = 0;
    try {
      ts = parse_int(f[0], "timestamp");
      m.push_back(parse_double(f[1], "masseter sample"));
      s.push_back(parse_double(f[2], "submental sample"));
    } catch (const FormatError& e) {
      throw FormatError(where + ": " + e.what() + " (last good line " + std::to_string(last_good) + ")");
    }
    if (ts <= prev_ts) throw FormatError(where + ": timestamp regression");
    prev_ts = ts;
    last_good = lineno;
  }
  if (declared >= 0 && static_cast<long long>(m.size()) != declared) {
    throw FormatError("recording truncated: expected " + std::to_string(declared) + " samples, found " +
                      std::to_string(m.size()) + " (last good line " + std::to_string(last_good) + ")");
  }
  rec.channel(Channel::Masseter) = Eigen::Map<const VectorXd>(m.data(), static_cast<Eigen::Index>(m.size()));
  rec.channel(Channel::Submental) = Eigen::Map<const VectorXd>(s.data(), static_cast<Eigen::Index>(s.size()));
  if (annotations) rec.annotations = read_annotations(*annotations);
  rec.validate();
  return rec;
}

std::filesystem::path annotation_path(const std::filesystem::path& path) {
  return std::filesystem::path(path.string() + ".ann");
}

void write_recording(const RawRecording& rec, const std::filesystem::path& path) {
  auto data = open_out(path);
  auto ann = open_out(annotation_path(path));
  write_recording(rec, data, ann);
}

RawRecording read_recording(const std::filesystem::path& path) {
  auto data = open_in(path);
  const auto ap = annotation_path(path);
  if (std::filesystem::exists(ap)) {
    auto ann = open_in(ap);
    return read_recording(data, &ann);
  }
  return read_recording(data, nullptr);
}

// --- models ---------------------------------------------------------------

std::uint64_t checksum(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

std::string join_vector(const VectorXd& v) {
  std::string s;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += format_double(v[i]);
  }
  return s;
}

VectorXd parse_vector(std::string_view s, std::string_view what) {
  if (s.empty()) return VectorXd();
  const auto parts = split(s, ',');
  VectorXd v(static_cast<Eigen::Index>(parts.size()));
  for (std::size_t i = 0; i < parts.size(); ++i) v[static_cast<Eigen::Index>(i)] = parse_double(parts[i], what);
  return v;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

std::string serialize_model(const learn::LinearModel& model) {
  std::ostringstream o;
  o << kModelMagic << '\n';
  o << "positive=" << to_string(model.positive) << '\n';
  o << "feature_names=";
  for (std::size_t i = 0; i < model.feature_names.size(); ++i) o << (i ? "," : "") << model.feature_names[i];
  o << '\n';
  o << "mean=" << join_vector(model.mean) << '\n';
  o << "scale=" << join_vector(model.scale) << '\n';
  o << "weights=" << join_vector(model.weights) << '\n';
  o << "bias=" << format_double(model.bias) << '\n';
  const auto& c = model.config;
  o << "config.C=" << format_double(c.C) << '\n';
  o << "config.loss=" << c.loss << '\n';
  o << "config.max_epochs=" << c.max_epochs << '\n';
  o << "config.tolerance=" << format_double(c.tolerance) << '\n';
  o << "config.seed=" << c.seed << '\n';
  o << "config.class_weights=";
  if (c.class_weights) {
    bool first = true;
    for (const auto& [l, w] : *c.class_weights) {
      o << (first ? "" : ",") << to_string(l) << ':' << format_double(w);
      first = false;
    }
  } else {
    o << "balanced";
  }
  o << '\n';
  o << "report.epochs=" << model.report.epochs << '\n';
  o << "report.converged=" << (model.report.converged ? 1 : 0) << '\n';
  std::string body = o.str();
  body += "checksum=" + hex64(checksum(body)) + '\n';
  return body;
}

learn::LinearModel parse_model(std::string_view text) {
  const auto first_nl = text.find('\n');
  if (first_nl == std::string_view::npos || trim(text.substr(0, first_nl)) != kModelMagic) {
    throw FormatError("model: unsupported version (expected '" + std::string(kModelMagic) + "')");
  }
  const auto pos = text.rfind("checksum=");
  if (pos == std::string_view::npos || (pos > 0 && text[pos - 1] != '\n')) {
    throw FormatError("model: missing checksum");
  }
  const auto stored = trim(text.substr(pos + 9));
  const auto body = text.substr(0, pos);
  if (stored.substr(0, stored.find('\n')) != hex64(checksum(body))) {
    throw FormatError("model: checksum mismatch (file corrupted)");
  }

  std::map<std::string, std::string, std::less<>> kv;
  for (auto line : split(body.substr(first_nl + 1), '\n')) {
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw FormatError("model: malformed line '" + std::string(line) + "'");
    kv.emplace(std::string(line.substr(0, eq)), std::string(line.substr(eq + 1)));
  }
  auto field = [&](std::string_view key) -> const std::string& {
    const auto it = kv.find(key);
    if (it == kv.end()) throw FormatError("model schema: missing field '" + std::string(key) + "'");
    return it->second;
  };

  learn::LinearModel m;
  m.positive = parse_label(field("positive"));
  for (auto n : split(field("feature_names"), ',')) m.feature_names.emplace_back(n);
  m.mean = parse_vector(field("mean"), "mean");
  m.scale = parse_vector(field("scale"), "scale");
  m.weights = parse_vector(field("weights"), "weight");
  m.bias = parse_double(field("bias"), "bias");
  m.config.C = parse_double(field("config.C"), "C");
  m.config.loss = field("config.loss");
  m.config.max_epochs = static_cast<int>(parse_int(field("config.max_epochs"), "max_epochs"));
  m.config.tolerance = parse_double(field("config.tolerance"), "tolerance");
  m.config.seed = static_cast<std::uint64_t>(parse_int(field("config.seed"), "seed"));
  const auto& cw = field("config.class_weights");
  if (cw != "balanced") {
    learn::ClassWeights w;
    for (auto item : split(cw, ',')) {
      const auto colon = item.find(':');
      if (colon == std::string_view::npos) throw FormatError("model: malformed class weight");
      w[parse_label(item.substr(0, colon))] = parse_double(item.substr(colon + 1), "class weight");
    }
    m.config.class_weights = w;
  }
  m.report.epochs = static_cast<int>(parse_int(field("report.epochs"), "epochs"));
  m.report.converged = field("report.converged") == "1";

  const auto n = static_cast<Eigen::Index>(m.feature_names.size());
  if (m.weights.size() != n || m.mean.size() != n || m.scale.size() != n) {
    throw FormatError("model schema: vector lengths do not match feature_names");
  }
  if (!m.weights.allFinite() || !std::isfinite(m.bias)) throw FormatError("model: non-finite weights");
  return m;
}

void save_model(const learn::LinearModel& model, const std::filesystem::path& path) {
  auto f = open_out(path);
  f << serialize_model(model);
}

learn::LinearModel load_model(const std::filesystem::path& path) {
  auto f = open_in(path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_model(ss.str());
}

// --- datasets -------------------------------------------------------------

void write_dataset(const features::FeatureMatrix& m, std::ostream& out) {
  out << "participant,label,onset_s,termination_s";
  for (const auto& n : m.names) out << ',' << n;
  out << '\n';
  std::string row;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const auto k = static_cast<std::size_t>(i);
    row = m.participants[k];
    row += ',';
    row += to_string(m.labels[k]);
    row += ',' + format_double(m.windows[k].onset) + ',' + format_double(m.windows[k].termination);
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      row += ',';
      row += format_double(m.values(i, j));
    }
    row += '\n';
    out << row;
  }
}

features::FeatureMatrix read_dataset(std::istream& in) {
  features::FeatureMatrix m;
  std::string line;
  if (!std::getline(in, line)) throw FormatError("dataset: empty file");
  const auto head = split(trim(line), ',');
  if (head.size() < 5 || head[0] != "participant" || head[1] != "label" || head[2] != "onset_s" ||
      head[3] != "termination_s") {
    throw FormatError("dataset: unexpected header");
  }
  for (std::size_t i = 4; i < head.size(); ++i) m.names.emplace_back(head[i]);
  const std::size_t cols = m.names.size();
  std::vector<double> vals;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = trim(line);
    if (t.empty()) continue;
    const auto f = split(t, ',');
    if (f.size() != cols + 4) {
      throw FormatError("dataset line " + std::to_string(lineno) + ": expected " +
                        std::to_string(cols + 4) + " fields");
    }
    m.participants.emplace_back(f[0]);
    m.labels.push_back(parse_label(f[1]));
    m.windows.push_back({parse_double(f[2], "onset"), parse_double(f[3], "termination")});
    for (std::size_t j = 0; j < cols; ++j) vals.push_back(parse_double(f[4 + j], "feature value"));
  }
  const auto rows = static_cast<Eigen::Index>(m.labels.size());
  m.values = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      vals.data(), rows, static_cast<Eigen::Index>(cols));
  return m;
}

void write_dataset(const features::FeatureMatrix& m, const std::filesystem::path& path) {
  auto f = open_out(path);
  write_dataset(m, f);
}

features::FeatureMatrix read_dataset(const std::filesystem::path& path) {
  auto f = open_in(path);
  return read_dataset(f);
}

// --- event logs -------------------------------------------------------------

std::string event_line(const ChewEvent& e) {
  return "event," + format_fixed(e.onset) + ',' + format_fixed(e.termination) + ',' +
         format_fixed(e.duration());
}

void write_event_log(const std::vector<ChewEvent>& events, std::ostream& out) {
  for (const auto& e : events) out << event_line(e) << '\n';
}

std::vector<ChewEvent> read_event_log(std::istream& in) {
  std::vector<ChewEvent> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = trim(line);
    if (t.empty() || t.starts_with('#')) continue;
    const auto f = split(t, ',');
    if (f.size() != 4 || f[0] != "event") {
      throw FormatError("event log line " + std::to_string(lineno) +
                        ": expected 'event,onset_s,termination_s,duration_s'");
    }
    out.push_back({parse_double(f[1], "onset"), parse_double(f[2], "termination")});
  }
  return out;
}

void write_bursts(const std::vector<events::BurstInterval>& bursts, std::ostream& out) {
  out << "kind,onset_s,termination_s\n";
  for (const auto& b : bursts) {
    out << (b.channel == Channel::Masseter ? "chew" : "swallow") << ',' << format_double(b.onset) << ','
        << format_double(b.termination) << '\n';
  }
}

// --- reports ----------------------------------------------------------------

void write_metrics_report(const metrics::SessionMetrics& m, std::ostream& out) {
  out << "L=" << m.event_count << '\n'
      << "sequences=" << m.sequence_count << '\n'
      << "CR_overall=" << format_fixed(m.cr_overall) << '\n'
      << "mean_chew_period=" << format_fixed(m.mean_chew_period) << '\n'
      << "chew_dur=" << format_fixed(m.chew_dur) << '\n'
      << "chew_gap=" << format_fixed(m.chew_gap) << (m.chew_gap_defined ? "" : " (undefined)") << '\n'
      << "seq_dur=" << format_fixed(m.seq_dur) << '\n'
      << "seq_gap=" << format_fixed(m.seq_gap) << (m.seq_gap_defined ? "" : " (undefined)") << '\n'
      << "chews_per_sequence=" << format_fixed(m.chews_per_sequence) << '\n';
  out << "L,sequences,CR_overall,mean_chew_period,chew_dur,chew_gap,seq_dur,seq_gap,chews_per_sequence\n"
      << m.event_count << ',' << m.sequence_count << ',' << format_fixed(m.cr_overall) << ','
      << format_fixed(m.mean_chew_period) << ',' << format_fixed(m.chew_dur) << ','
      << format_fixed(m.chew_gap) << ',' << format_fixed(m.seq_dur) << ',' << format_fixed(m.seq_gap)
      << ',' << format_fixed(m.chews_per_sequence) << '\n';
}

void write_eval_report(const learn::EvalReport& r, std::ostream& out) {
  const std::string pos(to_string(r.positive));
  out << "fold,participant,precision_" << pos << ",recall_" << pos << ",f1_" << pos
      << ",precision_NA,recall_NA,f1_NA,test_rows,f1_sd\n";
  auto metric = [](const std::map<Label, learn::ClassMetrics>& m, Label l) {
    const auto it = m.find(l);
    return it == m.end() ? learn::ClassMetrics{} : it->second;
  };
  for (std::size_t i = 0; i < r.folds.size(); ++i) {
    const auto& f = r.folds[i];
    const auto p = metric(f.metrics, r.positive), n = metric(f.metrics, Label::NA);
    out << i + 1 << ',' << f.participant << ',' << format_fixed(p.precision, 4) << ','
        << format_fixed(p.recall, 4) << ',' << format_fixed(p.f1, 4) << ',' << format_fixed(n.precision, 4)
        << ',' << format_fixed(n.recall, 4) << ',' << format_fixed(n.f1, 4) << ',' << f.test_rows << ",\n";
  }
  const auto p = metric(r.average, r.positive), n = metric(r.average, Label::NA);
  out << "average,," << format_fixed(p.precision, 4) << ',' << format_fixed(p.recall, 4) << ','
      << format_fixed(p.f1, 4) << ',' << format_fixed(n.precision, 4) << ',' << format_fixed(n.recall, 4)
      << ',' << format_fixed(n.f1, 4) << ",," << format_fixed(r.f1_sd, 4) << '\n';
}

}  // namespace chewsense::io
