#include "cli.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace {

struct Result {
  int code = 0;
  std::string out;
  std::string err;
};

Result cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  Result r;
  r.code = chewsense::cli::run(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

struct TempDir {
  fs::path path;
  TempDir() : path(fs::temp_directory_path() / ("chewsense_cli_" + std::to_string(std::rand()))) {
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("exit codes") {
  CHECK(cli({"--help"}).code == 0);
  CHECK(cli({}).code == 2);
  const auto unknown = cli({"frobnicate"});
  CHECK(unknown.code == 2);
  CHECK(unknown.err.find("error:") != std::string::npos);
  CHECK(cli({"generate"}).code == 2);
  CHECK(cli({"analyze", "-e", "/nonexistent/events.csv"}).code == 1);
}

TEST_CASE("generate is deterministic") {
  TempDir d;
  CHECK(cli({"generate", "-o", d / "a.csv", "--duration", "5", "--seed", "9"}).code == 0);
  CHECK(cli({"generate", "-o", d / "b.csv", "--duration", "5", "--seed", "9"}).code == 0);
  CHECK(cli({"generate", "-o", d / "c.csv", "--duration", "5", "--seed", "10"}).code == 0);
  CHECK(slurp(d / "a.csv") == slurp(d / "b.csv"));
  CHECK(slurp(d / "a.csv.ann") == slurp(d / "b.csv.ann"));
  CHECK(slurp(d / "a.csv") != slurp(d / "c.csv"));
}

TEST_CASE("threshold bursts are scored against the annotations") {
  TempDir d;
  REQUIRE(cli({"generate", "-o", d / "r.csv", "--duration", "20", "--seed", "4"}).code == 0);
  const auto r = cli({"bursts", "-i", d / "r.csv", "-o", d / "b.csv"});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("precision=1.0000 recall=1.0000") != std::string::npos);
  CHECK(slurp(d / "b.csv").starts_with("kind,onset_s,termination_s\n"));
  CHECK(cli({"bursts", "-i", d / "r.csv", "--channel", "jaw"}).code == 1);
}

TEST_CASE("featurize then leave-one-participant-out") {
  TempDir d;
  std::vector<std::string> feat = {"featurize", "-o", d / "data.csv"};
  for (int p = 1; p <= 3; ++p) {
    const std::string rec = d / ("p" + std::to_string(p) + ".csv");
    REQUIRE(cli({"generate", "-o", rec, "--duration", "20", "--seed", std::to_string(p), "--participant",
                 "P0" + std::to_string(p)})
                .code == 0);
    feat.push_back("-i");
    feat.push_back(rec);
  }
  REQUIRE(cli(feat).code == 0);
  const auto r = cli({"eval-lopo", "-d", d / "data.csv"});
  REQUIRE(r.code == 0);
  std::istringstream in(r.out);
  std::vector<std::string> lines;
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  REQUIRE(lines.size() == 5);
  CHECK(lines[0].starts_with("fold,participant,"));
  CHECK(lines[1].find(",P01,") != std::string::npos);
  CHECK(lines[4].starts_with("average,"));
}

TEST_CASE("analyze reports the overall chewing rate") {
  TempDir d;
  {
    std::ofstream f(d / "ev.csv");
    f << "event,0.0,0.4,0.4\nevent,1.0,1.4,0.4\nevent,2.0,2.5,0.5\n";
  }
  const auto r = cli({"analyze", "-e", d / "ev.csv"});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("CR_overall=1.200000") != std::string::npos);
}

TEST_CASE("feedback simulation prints transitions") {
  TempDir d;
  {
    std::ofstream f(d / "rates.csv");
    f << "1,0.2\n2,0.2\n3,1.0\n4,2.0\n5,2.5\n";
  }
  const auto r = cli({"feedback-sim", "-r", d / "rates.csv", "--r-ref", "1.5"});
  REQUIRE(r.code == 0);
  CHECK(r.out == "level,1.000,NoPulse\nlevel,3.000,SinglePulse\nlevel,4.000,DoublePulse\n"
                 "level,5.000,IntenseDouble\n");
}

}  // TEST_SUITE
