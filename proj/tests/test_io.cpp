#include "chewsense/random.hpp"
#include "chewsense/io.hpp"
#include "chewsense/synth.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace chewsense;

namespace {

RawRecording small_recording() {
  synth::SessionPlan p;
  p.duration = 3.0;
  p.baseline_lead = 1.0;
  p.seed = 77;
  p.swallow_every_n_chews = 2;
  return synth::gen_session(p);
}

learn::LinearModel small_model() {
  learn::LinearModel m;
  m.weights = (VectorXd(3) << 0.1, -2.5e-7, 1.0 / 3.0).finished();
  m.bias = -0.125;
  m.mean = (VectorXd(3) << 1.0, 2.0, 3.0).finished();
  m.scale = (VectorXd(3) << 0.5, 1e-3, 7.0).finished();
  m.feature_names = {"a", "b", "c"};
  m.config.C = 5.0;
  m.config.class_weights = learn::ClassWeights{{Label::NA, 0.6}, {Label::C, 3.0}};
  m.report.epochs = 12;
  m.report.converged = true;
  return m;
}

std::vector<std::string> lines_of(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::string join(const std::vector<std::string>& lines) {
  std::string out;
  for (const auto& l : lines) out += l + "\n";
  return out;
}

}  // namespace

TEST_SUITE("io") {

TEST_CASE("number formatting round trips") {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 123456789.125, 0.0}) {
    CHECK(io::parse_double(io::format_double(v)) == v);
  }
  CHECK(io::format_fixed(1.2) == "1.200000");
  CHECK_THROWS_AS(io::parse_double("1.5x"), FormatError);
  CHECK_THROWS_AS(io::parse_double(""), FormatError);
}

TEST_CASE("recording round trip is exact") {
  const auto rec = small_recording();
  std::stringstream data, ann;
  io::write_recording(rec, data, ann);
  const auto back = io::read_recording(data, &ann);
  CHECK(back == rec);
}

TEST_CASE("recording files with and without annotations") {
  const auto dir = std::filesystem::temp_directory_path() / "chewsense_io_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "rec.csv";
  auto rec = small_recording();
  io::write_recording(rec, path);
  CHECK(std::filesystem::exists(io::annotation_path(path)));
  CHECK(io::read_recording(path) == rec);

  std::filesystem::remove(io::annotation_path(path));
  const auto bare = io::read_recording(path);
  CHECK(bare.annotations.empty());
  CHECK(bare.channel(Channel::Masseter) == rec.channel(Channel::Masseter));

  rec.annotations.clear();
  io::write_recording(rec, path);
  CHECK(io::read_recording(path).annotations.empty());
  std::filesystem::remove_all(dir);
}

TEST_CASE("truncated recording names the last good line") {
  const auto rec = small_recording();
  std::stringstream data, ann;
  io::write_recording(rec, data, ann);
  auto lines = lines_of(data.str());
  lines.resize(lines.size() - 10);
  const std::size_t last_good = lines.size();
  std::istringstream cut(join(lines));
  CHECK_THROWS_WITH_AS(io::read_recording(cut, nullptr),
                       doctest::Contains(("last good line " + std::to_string(last_good)).c_str()), FormatError);

  // A half-written final row.
  lines.back() = lines.back().substr(0, lines.back().find(','));
  std::istringstream partial(join(lines));
  CHECK_THROWS_WITH_AS(io::read_recording(partial, nullptr),
                       doctest::Contains(("last good line " + std::to_string(last_good - 1)).c_str()), FormatError);
}

TEST_CASE("model round trip keeps every decision bit-identical") {
  const auto m = small_model();
  const auto text = io::serialize_model(m);
  const auto back = io::parse_model(text);
  CHECK(back.weights == m.weights);
  CHECK(back.mean == m.mean);
  CHECK(back.scale == m.scale);
  CHECK(back.bias == m.bias);
  CHECK(back.feature_names == m.feature_names);
  CHECK(back.config.class_weights == m.config.class_weights);
  CHECK(back.report.epochs == 12);
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    VectorXd x(3);
    for (auto& v : x) v = rng.normal() * 10.0;
    CHECK(back.decision(x) == m.decision(x));
  }
  CHECK(io::serialize_model(back) == text);
}

TEST_CASE("corrupted model is rejected by checksum") {
  auto text = io::serialize_model(small_model());
  const auto pos = text.find("weights=") + 9;
  text[pos] = text[pos] == '1' ? '2' : '1';
  CHECK_THROWS_WITH_AS(io::parse_model(text), doctest::Contains("checksum"), FormatError);
}

TEST_CASE("missing field with a valid checksum is a schema error") {
  auto lines = lines_of(io::serialize_model(small_model()));
  lines.pop_back();  // checksum
  std::erase_if(lines, [](const std::string& l) { return l.rfind("bias=", 0) == 0; });
  std::string body = join(lines);
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(io::checksum(body)));
  body += "checksum=" + std::string(hex) + "\n";
  CHECK_THROWS_WITH_AS(io::parse_model(body), doctest::Contains("model schema: missing field 'bias'"), FormatError);
}

TEST_CASE("unknown model version") {
  auto text = io::serialize_model(small_model());
  text.replace(0, io::kModelMagic.size(), "chewsense-model v9");
  CHECK_THROWS_WITH_AS(io::parse_model(text), doctest::Contains("version"), FormatError);
}

TEST_CASE("dataset round trip") {
  features::FeatureMatrix m;
  m.names = {"x", "y"};
  m.values = (MatrixXd(3, 2) << 0.1, 2.0, -3.5, 1e-9, 7.0, 1.0 / 7.0).finished();
  m.labels = {Label::C, Label::NA, Label::S};
  m.participants = {"P01", "P01", "P02"};
  m.windows = {{0.0, 0.5}, {0.25, 0.75}, {1.0, 2.625}};
  std::stringstream ss;
  io::write_dataset(m, ss);
  const auto back = io::read_dataset(ss);
  CHECK(back.names == m.names);
  CHECK(back.values == m.values);
  CHECK(back.labels == m.labels);
  CHECK(back.participants == m.participants);
  CHECK(back.windows[2].termination == 2.625);
}

TEST_CASE("event log round trip") {
  const std::vector<ChewEvent> ev = {{0.0, 0.4}, {1.0, 1.4}, {2.0, 2.5}};
  std::stringstream ss;
  io::write_event_log(ev, ss);
  CHECK(io::read_event_log(ss) == ev);
  CHECK(io::event_line(ev[2]) == "event,2.000000,2.500000,0.500000");
  std::istringstream bad("event,1.0\n");
  CHECK_THROWS_AS(io::read_event_log(bad), FormatError);
}

}  // TEST_SUITE
