#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "cli.hpp"
#include "slitbundle/error.hpp"
#include "slitbundle/io.hpp"
#include "slitbundle/systems.hpp"

namespace slitbundle {
namespace {

namespace fs = std::filesystem;

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

class TempDir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("slitbundle_test_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
                                        "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string file(const std::string& name, const std::string& text = "") const {
    const auto path = (dir_ / name).string();
    if (!text.empty()) std::ofstream(path) << text;
    return path;
  }
  fs::path dir_;
};

constexpr const char* kHeisenbergConfig = R"({
  "name": "heisenberg-expr", "dim": 3,
  "frame": [["1", "0", "-x2/2"], ["0", "1", "x1/2"]]
})";

TEST(Config, ParsesFrameMetricDomainAndBox) {
  const System sys = parse_system_config(R"({
    "name": "disk", "dim": 3,
    "frame": [["1", "0", "-x2/2"], ["0", "1", "x1/2"]],
    "metric": [["1","0","0"],["0","1","0"],["0","0","2"]],
    "domain": ["4 - x1^2 - x2^2"],
    "sample_box": {"lo": [-1, -1, -1], "hi": [1, 1, 1]}
  })");
  EXPECT_EQ(sys.name, "disk");
  EXPECT_EQ(sys.rank(), 2);
  EXPECT_FALSE(sys.metric.is_euclidean());
  EXPECT_TRUE(sys.contains(Point{0, 0, 5}));
  EXPECT_FALSE(sys.contains(Point{3, 0, 0}));
  EXPECT_EQ(sys.box.hi[0], 1.0);
}

TEST(Config, ExpressionFrameMatchesBuiltin) {
  const System a = parse_system_config(kHeisenbergConfig), b = builtin("heisenberg");
  const Point p{0.3, -0.2, 1};
  EXPECT_LE((a.frame_matrix(p) - b.frame_matrix(p)).norm(), 1e-15);
}

TEST(Config, Errors) {
  EXPECT_THROW(parse_system_config("{"), ConfigError);
  EXPECT_THROW(parse_system_config("[]"), ConfigError);
  EXPECT_THROW(parse_system_config(R"({"frame": [["1","0"],["0","1"]]})"), ConfigError);
  EXPECT_THROW(parse_system_config(R"({"dim": 2, "frame": [["1","0"]]})"), ConfigError);
  EXPECT_THROW(parse_system_config(R"({"dim": 2, "frame": [["1","0"],["0","x3"]]})"), ParseError);
  EXPECT_THROW(parse_system_config(R"({"dim": 2, "frame": [["1","0"],["2","0"]]})"), ConfigError);
  EXPECT_THROW(parse_system_config(R"({"dim": 2, "frame": [["1","0"],["0","1"]], "domain": ["-1"]})"), ConfigError);
  EXPECT_THROW(parse_system_config(R"({"dim": 2, "frame": [["1","0"],["0","1"]], "metric": [["1","0"],["0","-1"]]})"),
               ConfigError);
  EXPECT_THROW(parse_system_config(R"({"dim": 40, "frame": []})"), ConfigError);
}

TEST(Region, ObjectAndListForms) {
  const Domain a = parse_region(R"({"inequalities": ["1 - x1"]})", 2);
  const Domain b = parse_region(R"(["1 - x1", "x2 + 3"])", 2);
  EXPECT_EQ(a.inequalities().size(), 1u);
  EXPECT_EQ(b.inequalities().size(), 2u);
  EXPECT_THROW(parse_region(R"({"other": 1})", 2), ConfigError);
  EXPECT_THROW(parse_region(R"([1, 2])", 2), ConfigError);
}

TEST(Csv, HeaderAndRoundTrip) {
  const System sys = builtin("heisenberg");
  PlanRequest req;
  req.p = Point{0, 0, 0};
  req.q = Point{0, 0, 1};
  req.v_p = sys.ambient(req.p, Vec::Unit(2, 0));
  req.v_q = sys.ambient(req.q, Vec::Unit(2, 1));
  const PiecewisePath path = plan(sys, req);
  const std::string csv = csv_string(sys, path);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "t,q_1,q_2,q_3,v_1,v_2,v_3,a_1,a_2,arc_index");
  std::istringstream in(csv);
  const PiecewisePath back = read_csv(in, sys);
  ASSERT_EQ(back.arcs.size(), path.arcs.size());
  EXPECT_EQ(csv_string(sys, back), csv);
  const ValidationReport r1 = validate(sys, path, req.q, req.v_q), r2 = validate(sys, back, req.q, req.v_q);
  EXPECT_NEAR(r1.horizontality, r2.horizontality, 1e-12);
  EXPECT_NEAR(r1.min_speed, r2.min_speed, 1e-12);
  EXPECT_NEAR(*r1.position_error, *r2.position_error, 1e-12);
  EXPECT_NEAR(*r1.velocity_error, *r2.velocity_error, 1e-12);
  EXPECT_NEAR(r1.junction_velocity_jump, r2.junction_velocity_jump, 1e-12);
}

TEST(Csv, RejectsMalformedFiles) {
  const System sys = builtin("heisenberg");
  std::istringstream wrong_header("t,q_1,arc_index\n0,0,0\n");
  EXPECT_THROW(read_csv(wrong_header, sys), ConfigError);
  std::istringstream bad_number("t,q_1,q_2,q_3,v_1,v_2,v_3,a_1,a_2,arc_index\n0,0,0,x,1,0,0,1,0,0\n");
  EXPECT_THROW(read_csv(bad_number, sys), ConfigError);
  std::istringstream empty("");
  EXPECT_THROW(read_csv(empty, sys), ConfigError);
}

TEST(Cli, CheckInvolutiveExitsTwo) {
  const CliRun r = run({"check", "--system", "involutive3", "--points", "10"});
  EXPECT_EQ(r.code, 2);
  const auto doc = nlohmann::json::parse(r.out);
  EXPECT_EQ(doc["verdict"], "not-generating");
  EXPECT_EQ(doc["label"], "sampled, depth-capped");
  for (const auto& p : doc["points"]) EXPECT_EQ(p["growth"], nlohmann::json({2, 2}));
}

TEST(Cli, CheckHeisenbergExitsZero) { EXPECT_EQ(run({"check", "--system", "heisenberg", "--points", "20"}).code, 0); }

TEST(Cli, CheckInconclusiveExitsThree) {
  EXPECT_EQ(run({"check", "--system", "martinet", "--at", "0,0,0", "--depth", "2"}).code, 3);
}

TEST(Cli, CheckIsReproducible) {
  const auto a = run({"check", "--system", "flatbracket", "--points", "15", "--seed", "4"});
  const auto b = run({"check", "--system", "flatbracket", "--points", "15", "--seed", "4"});
  EXPECT_EQ(a.out, b.out);
}

TEST(Cli, VerifyHeisenberg) {
  const CliRun r = run({"verify", "--system", "heisenberg", "--trials", "200", "--seed", "7"});
  EXPECT_EQ(r.code, 0) << r.out << r.err;
  EXPECT_TRUE(nlohmann::json::parse(r.out)["passed"].get<bool>());
}

TEST_F(TempDir, PlanThenValidate) {
  const auto csv = file("path.csv"), svg = file("path.svg"), report = file("report.json");
  const CliRun r = run({"plan", "--system", "heisenberg", "--from", "0,0,0", "--vfrom", "1,0", "--to", "0,0,1", "--vto",
                     "0,1", "--seed", "1", "--out", csv, "--svg", svg, "--report", report});
  ASSERT_EQ(r.code, 0) << r.err;
  std::ifstream rep(report);
  const auto doc = nlohmann::json::parse(rep);
  EXPECT_EQ(doc["status"], "accepted");
  EXPECT_LE(doc["validation"]["position_error"].get<double>(), 1e-6);
  EXPECT_LE(doc["validation"]["velocity_error"].get<double>(), 1e-6);
  EXPECT_TRUE(fs::file_size(svg) > 0);

  const CliRun v = run({"validate", "--system", "heisenberg", "--path", csv, "--to", "0,0,1", "--vto", "0,1"});
  EXPECT_EQ(v.code, 0) << v.err;
  const auto vdoc = nlohmann::json::parse(v.out)["validation"];
  for (const char* key : {"horizontality", "min_speed", "position_error", "velocity_error", "junction_velocity_jump"}) {
    EXPECT_NEAR(vdoc[key].get<double>(), doc["validation"][key].get<double>(), 1e-12) << key;
  }
}

TEST_F(TempDir, ValidateCatchesWrongTarget) {
  const auto csv = file("path.csv");
  ASSERT_EQ(run({"plan", "--system", "heisenberg", "--from", "0,0,0", "--vfrom", "1,0", "--to", "0,0,1", "--vto",
                 "0,1", "--out", csv})
                .code,
            0);
  EXPECT_EQ(run({"validate", "--system", "heisenberg", "--path", csv, "--to", "0,0,2", "--vto", "0,1"}).code, 1);
}

TEST_F(TempDir, PlanWithRegionAndNegativeVelocity) {
  const auto region = file("region.json", R"({"inequalities": ["9 - x1^2 - x2^2"]})");
  const CliRun r = run({"plan", "--system", "heisenberg", "--from", "0,0,0", "--vfrom", "1,0", "--to", "0,0,1", "--vto",
                     "-1,0", "--region", region});
  EXPECT_EQ(r.code, 0) << r.err;
}

TEST(Cli, PlanNotReachableExitsTwo) {
  const CliRun r = run({"plan", "--system", "involutive3", "--from", "0,0,0", "--vfrom", "1,0", "--to", "0,0,1", "--vto",
                     "0,1"});
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(nlohmann::json::parse(r.err)["status"], "NotReachable");
}

TEST(Cli, PlanNoConvergenceExitsFour) {
  const CliRun r = run({"plan", "--system", "heisenberg", "--from", "0,0,0", "--vfrom", "1,0", "--to", "0,0,3", "--vto",
                     "0,1", "--restarts", "1", "--segments", "1"});
  EXPECT_EQ(r.code, 4) << r.err;
}

TEST(Cli, PlanTrivialRequest) {
  const CliRun r = run({"plan", "--system", "heisenberg", "--from", "1,1,1", "--vfrom", "1,0", "--to", "1,1,1", "--vto",
                     "1,0"});
  EXPECT_EQ(r.code, 0);
  EXPECT_TRUE(nlohmann::json::parse(r.err)["validation"]["trivial"].get<bool>());
}

TEST_F(TempDir, MalformedInputsExit64) {
  EXPECT_EQ(run({"check", "--system", file("bad.json", "{\"dim\": 3,")}).code, 64);
  EXPECT_EQ(run({"check", "--system", "nonexistent.json"}).code, 64);
  EXPECT_EQ(run({"check"}).code, 64);
  EXPECT_EQ(run({"frobnicate"}).code, 64);
  EXPECT_EQ(run({"plan", "--system", "heisenberg", "--from", "0,0", "--vfrom", "1,0", "--to", "0,0,1", "--vto", "0,1"})
                .code,
            64);
  EXPECT_EQ(run({"plan", "--system", "heisenberg", "--from", "0,0,0", "--vfrom", "0,0", "--to", "0,0,1", "--vto",
                 "0,1"})
                .code,
            64);
  EXPECT_EQ(run({"validate", "--system", "heisenberg", "--path", file("p.csv", "t,q_1\n")}).code, 64);
}

TEST_F(TempDir, GeodesicLeavingDomainExits70) {
  const auto cfg = file("half.json", R"({"dim": 2, "frame": [["1","0"],["0","1"]], "domain": ["1 - x1"]})");
  EXPECT_EQ(run({"geodesic", "--system", cfg, "--from", "0.5,0", "--fiber", "1,0", "--time", "2"}).code, 70);
}

TEST_F(TempDir, GeodesicOfConfigSystem) {
  const auto cfg = file("heis.json", kHeisenbergConfig);
  const CliRun r = run({"geodesic", "--system", cfg, "--from", "0,0,0", "--fiber", "1,0", "--time", "1"});
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string last = r.out.substr(r.out.rfind('\n', r.out.size() - 2) + 1);
  EXPECT_EQ(last.substr(0, 2), "1,");
}

TEST(Cli, Help) { EXPECT_EQ(run({"--help"}).code, 0); }

}  // namespace
}  // namespace slitbundle
