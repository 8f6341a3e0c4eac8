#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "l2ext/cli.hpp"
#include "l2ext/verify.hpp"

using namespace l2ext;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> v;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) v.push_back(line);
  return v;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "l2ext_cli_test";
  fs::create_directories(dir);
  return dir / name;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("index command") {
  const Run r = run({"index", "--weight", "gauss:1.0@0", "--center", "0", "--radius", "0.5",
                     "--degree", "16", "--format", "json"});
  REQUIRE(r.code == 0);
  const json j = json::parse(r.out);
  CHECK(std::abs(j.at("result").at("L").get<double>() - -std::expm1(-0.25) / 0.25) < 1e-8);
  CHECK(j.at("config").at("seed") == 0);
  CHECK(j.at("config").at("resolution") == "64x128");

  const Run z = run({"index", "--weight", "zero", "--center", "1+0.5i", "--radius", "0.3"});
  REQUIRE(z.code == 0);
  CHECK(std::abs(json::parse(z.out).at("result").at("L").get<double>() - 1.0) < 1e-8);
}

TEST_CASE("exit codes") {
  CHECK(run({}).code == 2);
  CHECK(run({"frobnicate"}).code == 2);
  CHECK(run({"index", "--weight", "re(z", "--radius", "0.5"}).code == 2);
  CHECK(run({"index", "--weight", "gauss:1", "--radius", "-1"}).code == 2);
  CHECK(run({"index", "--weight", "gauss:1", "--bogus", "1"}).code == 2);
  CHECK(run({"index", "--metric", "metric:[[1,z],[.,1]]", "--center", "0.9", "--radius", "0.5",
             "--xi", "1,0"})
            .code == 3);
  const Run h = run({"verify", "--suite", "harmonic", "--weight", "2*re(z)", "--samples", "0",
                     "--radii", "0.5", "--tolerance", "1e-20"});
  CHECK(h.code == 4);
  CHECK(run({"verify", "--suite", "harmonic", "--weight", "2*re(z)", "--samples", "0", "--radii",
             "0.5"})
            .code == 0);
  const Run e = run({"index", "--weight", "foo(z)"});
  CHECK(e.code == 2);
  CHECK_FALSE(e.err.empty());
}

TEST_CASE("sweep csv layout") {
  const Run r = run({"sweep", "--weight", "gauss:1", "--radii",
                     "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1.0"});
  REQUIRE(r.code == 0);
  const auto ls = lines(r.out);
  REQUIRE(ls.size() == 11);
  CHECK(ls[0] == "a_re,a_im,r,L,N,converged,cond_estimate");
  CHECK(r.out.find('\r') == std::string::npos);
  const Run c = run({"sweep", "--weight", "2*re(z1*z2)", "--radii", "0.3", "--s", "0.3",
                     "--cylinder-degree", "6", "--cylinder-resolution", "12x24"});
  REQUIRE(c.code == 0);
  CHECK(lines(c.out)[0] == "a_re,a_im,r,s,L,N,converged,cond_estimate");
  const Run v = run({"sweep", "--metric", "metric:[[2,1],[.,1]]", "--radii", "0.3", "--xi",
                     "1,0;0,1"});
  REQUIRE(v.code == 0);
  CHECK(lines(v.out)[0] == "a_re,a_im,r,xi,L,N,converged,cond_estimate");
  CHECK(lines(v.out).size() == 3);
}

TEST_CASE("sweep isolates failing rows") {
  const Run r = run({"sweep", "--weight", "zero", "--centers", "0,0.8", "--radii", "0.5",
                     "--domain-radius", "1"});
  CHECK(r.code == 3);
  const auto ls = lines(r.out);
  REQUIRE(ls.size() == 3);
  CHECK(ls[2].find("nan") != std::string::npos);
  CHECK(r.err.find("region-outside-domain") != std::string::npos);
}

TEST_CASE("plot data slope") {
  const Run r = run({"sweep", "--weight", "gauss:1", "--radii", "0.02,0.04,0.06,0.08,0.1",
                     "--format", "plot"});
  REQUIRE(r.code == 0);
  const auto ls = lines(r.out);
  REQUIRE(ls.size() == 6);
  CHECK(ls[0] == "x,y");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = 5;
  for (std::size_t k = 1; k < ls.size(); ++k) {
    const auto comma = ls[k].find(',');
    const double x = std::stod(ls[k].substr(0, comma));
    const double y = std::stod(ls[k].substr(comma + 1));
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  CHECK(std::abs(slope + 0.5) < 0.01);
}

TEST_CASE("config files merge under flags") {
  const fs::path cfg = scratch("cfg.json");
  std::ofstream(cfg) << R"({"command": "index", "weight": "gauss:2", "radius": 0.4})";
  const Run a = run({"index", "--config", cfg.string()});
  REQUIRE(a.code == 0);
  const json ja = json::parse(a.out);
  CHECK(std::abs(ja.at("result").at("L").get<double>() - -std::expm1(-2 * 0.16) / 0.32) < 1e-8);
  const Run b = run({"index", "--config", cfg.string(), "--radius", "0.2"});
  REQUIRE(b.code == 0);
  CHECK(json::parse(b.out).at("config").at("radius") == 0.2);
  CHECK_FALSE(json::parse(b.out).at("config").contains("config"));

  const fs::path bad = scratch("bad.json");
  std::ofstream(bad) << R"({"weight": "gauss:2", "colour": "red"})";
  CHECK(run({"index", "--config", bad.string()}).code == 2);
  const fs::path wrong = scratch("wrong.json");
  std::ofstream(wrong) << R"({"command": "sweep", "weight": "gauss:2"})";
  CHECK(run({"index", "--config", wrong.string()}).code == 2);
  CHECK(run({"index", "--config", scratch("missing.json").string()}).code == 2);
}

TEST_CASE("file outputs") {
  const fs::path csv = scratch("sweep.csv");
  fs::remove(csv);
  const Run r = run({"sweep", "--weight", "gauss:1", "--radii", "0.1,0.2", "--output",
                     csv.string()});
  REQUIRE(r.code == 0);
  CHECK(r.out.empty());
  CHECK(lines(slurp(csv)).size() == 3);
  const json side = json::parse(slurp(csv.string() + ".config.json"));
  CHECK(side.at("weight") == "gauss:1");
  CHECK_FALSE(side.contains("output"));
  CHECK(run({"sweep", "--weight", "gauss:1", "--output", "/nonexistent/dir/out.csv"}).code == 2);
}

TEST_CASE("verify output round-trips and is deterministic") {
  const std::vector<std::string> args = {"verify", "--suite", "equivalence", "--weight", "gauss:1",
                                         "--samples", "0", "--eps", "0.2,-0.1", "--seed", "3"};
  const Run a = run(args);
  const Run b = run(args);
  REQUIRE(a.code == 0);
  CHECK(a.out == b.out);
  const json j = json::parse(a.out);
  CHECK(j.at("provenance").at("seed") == 3);
  const VerificationReport rep = report_from_json(j);
  CHECK(rep.overall);
  CHECK(to_json(rep).at("rows") == j.at("rows"));
}
