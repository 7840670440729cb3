#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN

#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "mlab/spectral.hpp"

using json = nlohmann::json;

namespace {

std::string bin() { return MEETING_LAB_BIN; }
std::string source_dir() { return MLAB_SOURCE_DIR; }

std::string& work_dir() {
  static std::string dir = [] {
    char tmpl[] = "/tmp/mlab_cli_XXXXXX";
    const char* d = mkdtemp(tmpl);
    REQUIRE(d != nullptr);
    return std::string(d);
  }();
  return dir;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

struct RunResult {
  int code = -1;
  std::string out, err;
};

// Run the CLI with the given argument string; capture exit code and streams.
RunResult run(const std::string& args, const std::string& env_prefix = "") {
  static int counter = 0;
  const std::string o = work_dir() + "/out" + std::to_string(counter) + ".txt";
  const std::string e = work_dir() + "/err" + std::to_string(counter) + ".txt";
  ++counter;
  const std::string cmd = env_prefix + bin() + " " + args + " > " + o + " 2> " + e;
  const int rc = std::system(cmd.c_str());
  RunResult r;
  r.code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  r.out = read_file(o);
  r.err = read_file(e);
  return r;
}

// Drop lines mentioning wall_time_s: the one manifest field allowed to differ
// between reruns.
std::string strip_wall(const std::string& text) {
  std::istringstream in(text);
  std::ostringstream out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find("wall_time_s") == std::string::npos) out << line << "\n";
  }
  return out.str();
}

void write_complete_edges(const std::string& path, int n) {
  std::ofstream f(path);
  std::vector<std::pair<int, int>> edges;
  for (int u = 0; u < n; ++u)
    for (int v = u + 1; v < n; ++v) edges.emplace_back(u, v);
  f << n << " " << edges.size() << "\n";
  for (auto [u, v] : edges) f << u << " " << v << "\n";
}

void write_cycle_edges(const std::string& path, int n) {
  std::ofstream f(path);
  f << n << " " << n << "\n";
  for (int u = 0; u < n; ++u) f << u << " " << (u + 1) % n << "\n";
}

void write_star_edges(const std::string& path, int leaves) {
  std::ofstream f(path);
  f << leaves + 1 << " " << leaves << "\n";
  for (int v = 1; v <= leaves; ++v) f << 0 << " " << v << "\n";
}

// Minimal JSON-schema checker covering the keywords the shipped schemas use:
// type, required, properties, items.
bool schema_ok(const json& schema, const json& value, std::string& why) {
  if (schema.contains("type")) {
    const std::string t = schema["type"];
    const bool ok = (t == "object" && value.is_object()) || (t == "array" && value.is_array()) ||
                    (t == "string" && value.is_string()) ||
                    (t == "boolean" && value.is_boolean()) ||
                    (t == "integer" && value.is_number_integer()) ||
                    (t == "number" && value.is_number());
    if (!ok) {
      why = "expected type " + t + ", got " + value.dump().substr(0, 40);
      return false;
    }
  }
  if (schema.contains("required")) {
    for (const auto& key : schema["required"]) {
      if (!value.contains(key.get<std::string>())) {
        why = "missing required key " + key.get<std::string>();
        return false;
      }
    }
  }
  if (schema.contains("properties") && value.is_object()) {
    for (const auto& [key, sub] : schema["properties"].items()) {
      if (value.contains(key) && !schema_ok(sub, value[key], why)) {
        why = key + ": " + why;
        return false;
      }
    }
  }
  if (schema.contains("items") && value.is_array()) {
    for (const auto& item : value) {
      if (!schema_ok(schema["items"], item, why)) return false;
    }
  }
  return true;
}

void check_schema(const std::string& schema_name, const json& value) {
  const json schema = json::parse(read_file(source_dir() + "/docs/schema/" + schema_name));
  std::string why;
  const bool ok = schema_ok(schema, value, why);
  INFO(schema_name << ": " << why);
  CHECK(ok);
}

const std::string& k10_path() {
  static std::string p = [] {
    std::string path = work_dir() + "/k10.edges";
    write_complete_edges(path, 10);
    return path;
  }();
  return p;
}

const std::string& c12_path() {
  static std::string p = [] {
    std::string path = work_dir() + "/c12.edges";
    write_cycle_edges(path, 12);
    return path;
  }();
  return p;
}

// Parse the data lines of a CSV artifact (skipping '#' comments), split cells.
std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.push_back("");
    rows.push_back(cells);
  }
  return rows;
}

}  // namespace

TEST_CASE("no arguments prints usage and exits 1") {
  const RunResult r = run("");
  CHECK(r.code == 1);
  CHECK(r.err.find("Usage") != std::string::npos);
  CHECK(r.err.find("SUBCOMMAND") != std::string::npos);
  CHECK(run("no-such-command").code == 1);
}

TEST_CASE("green-ratio matches the complete-graph closed form and its schema") {
  const RunResult r = run("green-ratio --graph " + k10_path() + " --lambda 1");
  REQUIRE(r.code == 0);
  const json d = json::parse(r.out);
  CHECK(std::abs(d["value"].get<double>() - 2.0 / 11.0) <= 1e-9);
  CHECK(d["manifest"]["command"] == "green-ratio");
  CHECK(d["manifest"]["inputs"].size() == 1);
  CHECK(d["manifest"]["version"].is_string());
  check_schema("value_result.json", d);
  check_schema("manifest.json", d["manifest"]);
  // Bad rate maps to the precondition exit code.
  CHECK(run("green-ratio --graph " + k10_path() + " --lambda -3").code == 1);
}

TEST_CASE("validate accepts regular kernels and flags the star graph") {
  const std::string star = work_dir() + "/star5.edges";
  write_star_edges(star, 4);
  const RunResult bad = run("validate --graph " + star);
  CHECK(bad.code == 1);
  const json db = json::parse(bad.out);
  CHECK(db["accepted"] == false);
  CHECK(db["error"].get<std::string>().find("NonRegular") != std::string::npos);
  check_schema("validate_report.json", db);

  const RunResult good = run("validate --graph " + k10_path());
  CHECK(good.code == 0);
  const json dg = json::parse(good.out);
  CHECK(dg["accepted"] == true);
  CHECK(dg["irreducible"] == true);
  check_schema("validate_report.json", dg);
}

TEST_CASE("artifacts are reproducible modulo wall time") {
  const std::string args = "bound-scan --graph " + k10_path() +
                           " --lambda 1 --lambda 5 --epsilon 0.5 --m 1 --gamma 0";
  const RunResult a = run(args), b = run(args);
  REQUIRE(a.code == 0);
  REQUIRE(b.code == 0);
  CHECK(strip_wall(a.out) == strip_wall(b.out));
  const RunResult j1 = run("green-ratio --graph " + k10_path() + " --lambda 2");
  const RunResult j2 = run("green-ratio --graph " + k10_path() + " --lambda 2");
  CHECK(strip_wall(j1.out) == strip_wall(j2.out));
}

TEST_CASE("generated regular graphs round-trip through validation") {
  const std::string g = work_dir() + "/rrg20.edges";
  REQUIRE(run("rrg --k 3 --n 20 --seed 5 --out " + g).code == 0);
  CHECK(run("validate --graph " + g).code == 0);
  const std::string again = work_dir() + "/rrg20b.edges";
  REQUIRE(run("rrg --k 3 --n 20 --seed 5 --out " + again).code == 0);
  CHECK(read_file(g) == read_file(again));
  const RunResult j = run("rrg --k 3 --n 14 --seed 9 --format json");
  REQUIRE(j.code == 0);
  const json dj = json::parse(j.out);
  CHECK(dj["n"] == 14);
  CHECK(dj["edge_count"] == 21);
  check_schema("rrg.json", dj);
  // Odd n * k has no regular graph.
  CHECK(run("rrg --k 3 --n 15 --seed 1").code == 1);
}

TEST_CASE("simulate is a pure function of the seed across worker counts") {
  const std::string args =
      "simulate --graph " + k10_path() + " --lambda 1 --samples 20000 --seed 7";
  const RunResult w1 = run(args + " --workers 1");
  const RunResult w3 = run(args + " --workers 3");
  const RunResult we = run(args, "MEETING_LAB_THREADS=4 ");
  REQUIRE(w1.code == 0);
  const json d1 = json::parse(w1.out), d3 = json::parse(w3.out), de = json::parse(we.out);
  CHECK(d1["value"] == d3["value"]);
  CHECK(d1["value"] == de["value"]);
  CHECK(d1["std_error"] == d3["std_error"]);
  check_schema("simulate.json", d1);
  const double v = d1["value"].get<double>(), se = d1["std_error"].get<double>();
  CHECK(std::abs(v - 2.0 / 11.0) <= 5.0 * se + 1e-12);
  const RunResult other = run("simulate --graph " + k10_path() +
                              " --lambda 1 --samples 20000 --seed 8 --workers 2");
  CHECK(json::parse(other.out)["value"] != d1["value"]);
}

TEST_CASE("laplace commands agree with the spectral ratio on a walk-regular kernel") {
  const RunResult exact = run("laplace-exact --graph " + c12_path() + " --lambda 1");
  const RunResult ratio = run("green-ratio --graph " + c12_path() + " --lambda 1");
  const RunResult approx = run("laplace-approx --graph " + c12_path() + " --lambda 1 --mode trace");
  const RunResult alpha = run("laplace-approx --graph " + c12_path() + " --lambda 1 --mode alpha");
  REQUIRE(exact.code == 0);
  const double ve = json::parse(exact.out)["value"].get<double>();
  const double vr = json::parse(ratio.out)["value"].get<double>();
  const double vt = json::parse(approx.out)["value"].get<double>();
  const double va = json::parse(alpha.out)["value"].get<double>();
  CHECK(std::abs(ve - vr) <= 2e-8);
  CHECK(vt == vr);  // same spectral expression
  CHECK(std::abs(va - vt) <= 1e-7);
  check_schema("value_result.json", json::parse(exact.out));
}

TEST_CASE("alpha-table emits the hand-checked leading coefficients") {
  const RunResult r = run("alpha-table --graph " + k10_path() + " --n-max 3");
  REQUIRE(r.code == 0);
  const auto rows = csv_rows(r.out);
  REQUIRE(!rows.empty());
  CHECK(rows[0] == std::vector<std::string>{"n", "s", "alpha"});
  bool saw10 = false, saw22 = false;
  for (size_t i = 1; i < rows.size(); ++i) {
    REQUIRE(rows[i].size() == 3);
    if (rows[i][0] == "1" && rows[i][1] == "0") {
      CHECK(std::abs(std::stod(rows[i][2]) - 0.02) <= 1e-15);
      saw10 = true;
    }
    if (rows[i][0] == "2" && rows[i][1] == "2") {
      CHECK(std::abs(std::stod(rows[i][2]) + 0.004) <= 1e-15);
      saw22 = true;
    }
  }
  CHECK(saw10);
  CHECK(saw22);
}

TEST_CASE("bound report satisfies its own certified inequality") {
  const RunResult r = run("bound --graph " + k10_path() +
                          " --lambda 1 --epsilon 0.5 --m 1 --gamma 0 --with-lhs");
  REQUIRE(r.code == 0);
  const json d = json::parse(r.out);
  CHECK(d["lhs_exact"].get<double>() <= d["total"].get<double>());
  CHECK(d["term3"].get<double>() == 0.0);
  check_schema("bound_report.json", d);
  // Hypotheses are enforced: a 6-state kernel is too small.
  const std::string c6 = work_dir() + "/c6.edges";
  write_cycle_edges(c6, 6);
  const RunResult small = run("bound --graph " + c6 + " --lambda 1 --epsilon 0.5 --m 1 --gamma 0");
  CHECK(small.code == 1);
  CHECK(small.err.find("state count") != std::string::npos);
}

TEST_CASE("higher-order residual stays at quadrature accuracy through the CLI") {
  const RunResult r = run("higher-order --graph " + c12_path() +
                          " --m 1 --n-steps 0 --t 2 --quad-points 96");
  REQUIRE(r.code == 0);
  CHECK(json::parse(r.out)["residual"].get<double>() <= 1e-6);
}

TEST_CASE("spectrum output carries all eigenvalues in both formats") {
  const RunResult csv = run("spectrum --graph " + c12_path() + " --format csv");
  REQUIRE(csv.code == 0);
  const auto rows = csv_rows(csv.out);
  REQUIRE(rows.size() == 13);  // header + 12 eigenvalues
  CHECK(std::abs(std::stod(rows[12][1]) - 1.0) <= 1e-10);  // ascending, unit last
  const RunResult js = run("spectrum --graph " + c12_path());
  const json d = json::parse(js.out);
  CHECK(d["eigenvalues"].size() == 12);
  CHECK(d["has_unit"] == true);
  check_schema("spectrum.json", d);
}

TEST_CASE("tree-limit matches the in-process library value") {
  const RunResult r = run("tree-limit --k 3 --lambda 1");
  REQUIRE(r.code == 0);
  const json d = json::parse(r.out);
  CHECK(std::abs(d["value"].get<double>() - mlab::tree_green_ratio(3, 1.0)) <= 1e-12);
  CHECK(d["recurrence_warning"] == false);
  check_schema("value_result.json", d);
}

TEST_CASE("convergence-study keeps sorted rows and continues past per-row failures") {
  const RunResult r = run(
      "convergence-study --k 3 --n 16 --n 17 --n 14 --lambda 1 --graphs-per-n 2 --seed 3");
  REQUIRE(r.code == 0);
  const auto rows = csv_rows(r.out);
  REQUIRE(rows.size() >= 7);  // header + 3 sizes x 2 replicates
  CHECK(rows[0][0] == "n");
  std::vector<int> ns;
  int error_rows = 0, good_rows = 0;
  for (size_t i = 1; i < rows.size(); ++i) {
    REQUIRE(rows[i].size() == 12);
    ns.push_back(std::stoi(rows[i][0]));
    if (!rows[i][11].empty()) {
      ++error_rows;
      CHECK(rows[i][5] == "nan");
      CHECK(rows[i][0] == "17");  // odd n * k: no 3-regular graph exists
    } else {
      ++good_rows;
      const double value = std::stod(rows[i][5]);
      const double tree = std::stod(rows[i][8]);
      const double gap_tree = std::stod(rows[i][10]);
      CHECK(std::abs(std::abs(value - tree) - gap_tree) <= 1e-14);
      CHECK(value > 0.0);
      CHECK(value < 1.0);
    }
  }
  CHECK(std::is_sorted(ns.begin(), ns.end()));
  CHECK(error_rows == 2);
  CHECK(good_rows == 4);
  // Rerun reproduces the artifact bit-for-bit apart from timing.
  const RunResult again = run(
      "convergence-study --k 3 --n 16 --n 17 --n 14 --lambda 1 --graphs-per-n 2 --seed 3");
  CHECK(strip_wall(r.out) == strip_wall(again.out));
}

TEST_CASE("gnuplot scripts accompany CSV sweeps only when a data file exists") {
  const std::string csv = work_dir() + "/scan.csv";
  const std::string gp = work_dir() + "/scan.gp";
  CHECK(run("bound-scan --graph " + k10_path() + " --lambda 5 --gnuplot " + gp).code == 1);
  REQUIRE(run("bound-scan --graph " + k10_path() + " --lambda 5 --out " + csv + " --gnuplot " +
              gp).code == 0);
  const std::string script = read_file(gp);
  CHECK(script.find("plot '") != std::string::npos);
  CHECK(script.find(csv) != std::string::npos);
  const auto rows = csv_rows(read_file(csv));
  CHECK(rows.size() == 1 + 8);  // header + 1 lambda x 2 eps x 2 m x 2 gamma
}

TEST_CASE("bound-scan skips hypothesis-violating grid cells instead of dying") {
  // The default grid contains lambda = 0.5 with epsilon = 0.5, which violates
  // lambda > epsilon; those four cells must be dropped, not fatal.
  const std::string csv = work_dir() + "/scan_default.csv";
  REQUIRE(run("bound-scan --graph " + k10_path() + " --out " + csv).code == 0);
  const auto rows = csv_rows(read_file(csv));
  CHECK(rows.size() == 1 + 28);  // 4x2x2x2 grid minus the 4 invalid cells
  const RunResult j = run("bound-scan --graph " + k10_path() + " --format json");
  REQUIRE(j.code == 0);
  const json dj = json::parse(j.out);
  CHECK(dj["skipped_cells"] == 4);
  CHECK(dj["rows"].size() == 28);
  check_schema("rows_result.json", dj);
  // A grid with no valid cell is an input error.
  CHECK(run("bound-scan --graph " + k10_path() + " --lambda 0.3 --epsilon 0.5").code == 1);
}
