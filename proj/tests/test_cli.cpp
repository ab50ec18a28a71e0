#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "doctest.h"

#include "cli.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = delaykern::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("delaykern_cli_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Csv {
  std::vector<std::string> header;
  std::vector<std::vector<std::optional<double>>> rows;

  std::size_t col(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    FAIL("missing column " << name);
    return 0;
  }
};

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

Csv read_csv(const fs::path& p) {
  std::ifstream in(p);
  Csv csv;
  std::string line;
  std::getline(in, line);
  csv.header = split(line);
  while (std::getline(in, line)) {
    std::vector<std::optional<double>> row;
    for (const auto& cell : split(line)) {
      row.push_back(cell.empty() ? std::nullopt : std::optional<double>(std::stod(cell)));
    }
    csv.rows.push_back(std::move(row));
  }
  return csv;
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  return json::parse(in);
}

json error_json(const Result& r) {
  REQUIRE_FALSE(r.err.empty());
  return json::parse(r.err);
}

// Scoped environment variable.
struct Env {
  std::string name;
  Env(const std::string& n, const std::string& v) : name(n) { setenv(n.c_str(), v.c_str(), 1); }
  ~Env() { unsetenv(name.c_str()); }
};

}  // namespace

TEST_SUITE("regions") {
  TEST_CASE("four nested curves") {
    const auto dir = fresh_dir("regions");
    const auto r = run({"regions", "--out", dir.string()});
    REQUIRE(r.code == 0);
    for (const char* f : {"regions.csv", "regions.json", "regions.svg"}) CHECK(fs::exists(dir / f));
    const auto csv = read_csv(dir / "regions.csv");
    CHECK(csv.header == std::vector<std::string>{"a", "k_lower", "k_upper", "k_cheap", "k_expensive"});
    CHECK(csv.rows.size() == 139);
    for (const auto& row : csv.rows) {
      REQUIRE(row[2]);
      REQUIRE(row[3]);
      REQUIRE(row[4]);
      CHECK(*row[4] <= *row[3]);
      CHECK(*row[3] <= *row[2]);
      CHECK(*row[1] == *row[0]);
    }
    CHECK(*csv.rows.front()[0] == -6.0);
    CHECK(std::abs(*csv.rows.back()[0] - 0.9) < 1e-15);
  }

  TEST_CASE("no upper bound without delay") {
    const auto dir = fresh_dir("regions_t0");
    REQUIRE(run({"regions", "--out", dir.string(), "--T", "0"}).code == 0);
    const auto csv = read_csv(dir / "regions.csv");
    for (const auto& row : csv.rows) CHECK_FALSE(row[2].has_value());
    CHECK(read_json(dir / "regions.json")["has_upper_bound"] == false);
    CHECK(slurp(dir / "regions.svg").find(">k_upper<") == std::string::npos);
  }
}

TEST_CASE("scalar sweep curves") {
  const auto dir = fresh_dir("sweep");
  REQUIRE(run({"scalar-sweep", "--out", dir.string()}).code == 0);
  const auto csv = read_csv(dir / "scalar_sweep.csv");
  const auto a = csv.col("a");
  const auto k0 = csv.col("k[T=0]");
  const auto k1 = csv.col("k[T=1]");
  const auto k3 = csv.col("k[T=3]");
  for (const auto& row : csv.rows) {
    CHECK(row[k0].has_value());
    CHECK(row[k1].has_value() == (*row[a] < 1.0));
    if (row[k1] && row[k3]) CHECK(*row[k3] <= *row[k1]);
  }
}

TEST_SUITE("rd-kernels") {
  TEST_CASE("delayed kernel is lower and flatter") {
    const auto dir = fresh_dir("rd");
    REQUIRE(run({"rd-kernels", "--out", dir.string(), "--c", "1", "--d", "1", "--T", "1", "--r", "1"}).code == 0);
    const auto csv = read_csv(dir / "rd_kernels.csv");
    const auto x = csv.col("x");
    const auto k0 = csv.col("K0_numerical");
    const auto kt = csv.col("KT_numerical");
    std::size_t origin = 0;
    for (std::size_t i = 0; i < csv.rows.size(); ++i) {
      if (*csv.rows[i][x] == 0.0) origin = i;
    }
    const auto& c = csv.rows[origin];
    const auto& n = csv.rows[origin + 10];  // x = 0.5
    CHECK(*c[kt] < *c[k0]);
    CHECK(*c[kt] - *n[kt] < *c[k0] - *n[k0]);
    const auto meta = read_json(dir / "rd_kernels.json");
    CHECK(meta["thresholds"]["gain_gap"].get<double>() > 0.8);
    CHECK(meta["truncation"].size() == 2);
    CHECK(fs::exists(dir / "rd_symbols.csv"));
  }

  TEST_CASE("single kernel without delay") {
    const auto dir = fresh_dir("rd_t0");
    REQUIRE(run({"rd-kernels", "--out", dir.string(), "--T", "0"}).code == 0);
    const auto csv = read_csv(dir / "rd_kernels.csv");
    CHECK(csv.header == std::vector<std::string>{"x", "K0_numerical", "K0_closed_form"});
    CHECK_FALSE(read_json(dir / "rd_kernels.json").contains("thresholds"));
  }

  TEST_CASE("closed form approaches the numerical kernel like 1/r") {
    auto gap = [](const std::string& r) {
      const auto dir = fresh_dir("rd_gap" + r);
      REQUIRE(run({"rd-kernels", "--out", dir.string(), "--format", "json", "--d", "1", "--r", r}).code == 0);
      return read_json(dir / "rd_kernels.json")["l2_gap_numerical_vs_closed_form"].get<double>();
    };
    const double ratio = gap("10") / gap("100");
    CHECK(ratio > 8.0);
    CHECK(ratio < 12.0);
  }

  // The closed form is the r -> infinity limit; at r = 10 the gap is 3.8%,
  // independent of the grid. Kept as a recorded discrepancy.
  TEST_CASE("numerical and closed-form kernels within 2% at r = 10" * doctest::should_fail()) {
    const auto dir = fresh_dir("rd_r10");
    REQUIRE(run({"rd-kernels", "--out", dir.string(), "--format", "json", "--d", "1", "--r", "10"}).code == 0);
    CHECK(read_json(dir / "rd_kernels.json")["l2_gap_numerical_vs_closed_form"].get<double>() < 0.02);
  }
}

TEST_SUITE("circulant") {
  TEST_CASE("default panels") {
    const auto dir = fresh_dir("circ");
    REQUIRE(run({"circulant", "--out", dir.string()}).code == 0);
    const auto j = read_json(dir / "circulant.json");
    REQUIRE(j["cases"].size() == 3);
    const auto& r1 = j["cases"][1]["methods"]["small_delay"];
    const auto& r10 = j["cases"][2]["methods"]["small_delay"];
    CHECK(std::abs(r1["self_gain"].get<double>() - 2.8) <= 0.1);
    CHECK(std::abs(r10["self_gain"].get<double>() - 2.3) <= 0.1);
    CHECK(std::abs(r1["k_row"][1].get<double>() - 1.6) <= 0.1);
    CHECK(std::abs(r10["k_row"][1].get<double>() - 1.7) <= 0.1);
    for (const auto& c : j["cases"]) {
      for (const auto& [name, m] : c["methods"].items()) {
        CHECK(m["stable"] == true);
        CHECK(m["cost"].is_number());
      }
    }
    CHECK(read_csv(dir / "circulant_modes.csv").rows.size() == 30);
  }

  TEST_CASE("two agents from a config file") {
    const auto dir = fresh_dir("circ2");
    fs::create_directories(dir);
    std::ofstream(dir / "cfg.json") << R"({"a_row": [-1, 0.5], "cases": [{"T": 0.1, "r": 1}], "method": "numerical_opt"})";
    const auto r = run({"circulant", "--config", (dir / "cfg.json").string(), "--out", dir.string()});
    REQUIRE(r.code == 0);
    const auto j = read_json(dir / "circulant.json");
    CHECK(j["n"] == 2);
    CHECK(j["cases"][0]["methods"].size() == 1);
    CHECK(j["cases"][0]["methods"]["numerical_opt"]["stable"] == true);
  }

  TEST_CASE("errors") {
    const auto dir = fresh_dir("circ_err");
    auto r = run({"circulant", "--out", dir.string(), "--T", "0.3"});
    CHECK(r.code == 3);
    CHECK(error_json(r)["type"] == "UnstabilizableError");
    CHECK(error_json(r)["mode"] == 0);
    r = run({"circulant", "--out", dir.string(), "--a-row", "1,2,0"});
    CHECK(r.code == 2);
    CHECK(error_json(r)["type"] == "SymmetryError");
    r = run({"circulant", "--out", dir.string(), "--method", "magic"});
    CHECK(r.code == 2);
  }
}

TEST_CASE("verify passes and is deterministic") {
  const auto d1 = fresh_dir("verify1");
  const auto d2 = fresh_dir("verify2");
  REQUIRE(run({"verify", "--out", d1.string(), "--seed", "9"}).code == 0);
  REQUIRE(run({"verify", "--out", d2.string(), "--seed", "9"}).code == 0);
  CHECK(slurp(d1 / "verify.csv") == slurp(d2 / "verify.csv"));
  CHECK(slurp(d1 / "verify.json") == slurp(d2 / "verify.json"));
  const auto j = read_json(d1 / "verify.json");
  CHECK(j["summary"]["rows"] == 132);
  CHECK(j["summary"]["failures"] == 0);
  std::size_t zero_rows = 0;
  for (const auto& row : j["rows"]) {
    CHECK(row["rel_err_time"].get<double>() < 1e-3);
    if (row["zero_gain"] == true) {
      ++zero_rows;
      CHECK(row["rel_err_time"].get<double>() < 1e-9);
    }
  }
  CHECK(zero_rows == 12);
}

TEST_CASE("reruns are byte-identical") {
  for (const std::string cmd : {"regions", "scalar-sweep", "rd-kernels", "circulant"}) {
    const auto d1 = fresh_dir(cmd + "_a");
    const auto d2 = fresh_dir(cmd + "_b");
    REQUIRE(run({cmd, "--out", d1.string()}).code == 0);
    REQUIRE(run({cmd, "--out", d2.string()}).code == 0);
    for (const auto& entry : fs::directory_iterator(d1)) {
      CHECK_MESSAGE(slurp(entry.path()) == slurp(d2 / entry.path().filename()), entry.path());
    }
  }
}

TEST_SUITE("configuration") {
  TEST_CASE("precedence: flag, environment, config, default") {
    const auto dir = fresh_dir("prec");
    fs::create_directories(dir);
    std::ofstream(dir / "cfg.json") << R"({"n_points": 5, "T": 2.0})";
    const auto cfg = (dir / "cfg.json").string();
    auto T_of = [&]() { return read_json(dir / "regions.json")["params"]["T"].get<double>(); };

    REQUIRE(run({"regions", "--out", dir.string(), "--config", cfg}).code == 0);
    CHECK(T_of() == 2.0);
    CHECK(read_json(dir / "regions.json")["rows"].size() == 5);
    {
      Env env("DELAYKERN_T", "0.5");
      REQUIRE(run({"regions", "--out", dir.string(), "--config", cfg}).code == 0);
      CHECK(T_of() == 0.5);
      REQUIRE(run({"regions", "--out", dir.string(), "--config", cfg, "--T", "0.25"}).code == 0);
      CHECK(T_of() == 0.25);
    }
    REQUIRE(run({"regions", "--out", dir.string()}).code == 0);
    CHECK(T_of() == 1.0);
  }

  TEST_CASE("output directory and format from the environment") {
    const auto dir = fresh_dir("envout");
    Env out("DELAYKERN_OUT", dir.string());
    Env fmt("DELAYKERN_FORMAT", "csv");
    REQUIRE(run({"circulant"}).code == 0);
    CHECK(fs::exists(dir / "circulant.csv"));
    CHECK_FALSE(fs::exists(dir / "circulant.json"));
    CHECK_FALSE(fs::exists(dir / "circulant.svg"));
  }

  TEST_CASE("list flags from the environment") {
    const auto dir = fresh_dir("envlist");
    Env env("DELAYKERN_T_LIST", "0,2");
    REQUIRE(run({"scalar-sweep", "--out", dir.string(), "--format", "csv"}).code == 0);
    const auto csv = read_csv(dir / "scalar_sweep.csv");
    CHECK(csv.header == std::vector<std::string>{"a", "k[T=0]", "J[T=0]", "k[T=2]", "J[T=2]"});
  }

  TEST_CASE("config errors exit with 2 and JSON on stderr") {
    const auto dir = fresh_dir("cfgerr");
    fs::create_directories(dir);
    std::ofstream(dir / "bad.json") << "{ not json";
    std::ofstream(dir / "unknown.json") << R"({"Tee": 1})";
    std::ofstream(dir / "typed.json") << R"({"T": "one"})";
    for (const auto& args : std::vector<std::vector<std::string>>{
             {"regions", "--config", (dir / "bad.json").string()},
             {"regions", "--config", (dir / "unknown.json").string()},
             {"regions", "--config", (dir / "typed.json").string()},
             {"regions", "--config", (dir / "missing.json").string()},
             {"regions", "--T", "-1"},
             {"regions", "--a-min", "1", "--a-max", "0"},
             {"regions", "--n-points", "2.5"},
             {"regions", "--format", "pdf"},
             {"rd-kernels", "--c", "0"},
             {"rd-kernels", "--T", "1", "--alpha", "1"},
             {"verify", "--T-list", "0"},
             {"nonsense"},
             {}}) {
      std::vector<std::string> full = args;
      full.push_back("--out");
      full.push_back(dir.string());
      if (args.empty() || args[0] == "nonsense") full = args;
      const auto r = run(full);
      const std::string what = args.empty() ? std::string("(no args)") : args.back();
      CHECK_MESSAGE(r.code == 2, what);
      const auto j = error_json(r);
      CHECK(j["exit_code"] == 2);
      CHECK(j["status"] == "error");
      CHECK(j["message"].is_string());
    }
    {
      Env env("DELAYKERN_R", "abc");
      CHECK(run({"scalar-sweep", "--out", dir.string()}).code == 2);
    }
    CHECK_FALSE(fs::exists(dir / "regions.csv"));
  }

  TEST_CASE("help") {
    const auto r = run({"--help"});
    CHECK(r.code == 0);
    CHECK(r.out.find("rd-kernels") != std::string::npos);
  }
}
