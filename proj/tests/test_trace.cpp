#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <limits>

#include "ahb/solvers.hpp"
#include "ahb/summary.hpp"
#include "ahb/trace.hpp"

namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() / ("ahb_trace_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
                                         "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  out << s;
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

ahb::IterationRecord record(std::int64_t k, double fval, std::optional<double> dist) {
  ahb::IterationRecord r;
  r.k = k;
  r.fval = fval;
  r.gap = fval;
  r.gnorm = 0.1 * k;
  r.alpha = 0.98;
  r.beta = 1.0 / 3.0;
  r.step_norm = 1e-300;
  r.dist = dist;
  return r;
}

}  // namespace

TEST(FormatDouble, RoundTrips) {
  for (double v : {0.0, -0.0, 1.0, 0.1, 1.0 / 3.0, 1e-300, 5e-324, 1.7976931348623157e308, -2.5,
                   std::numeric_limits<double>::infinity()}) {
    auto back = ahb::parse_double(ahb::format_double(v));
    ASSERT_TRUE(back);
    EXPECT_EQ(*back, v);
  }
  EXPECT_TRUE(std::isnan(*ahb::parse_double(ahb::format_double(std::nan("")))));
  EXPECT_EQ(ahb::format_double(2.0), "2");
  EXPECT_FALSE(ahb::parse_double(""));
  EXPECT_FALSE(ahb::parse_double("1.0x"));
}

TEST(TraceCsv, RoundTrip) {
  TempDir dir;
  ahb::Trace t;
  t.records = {record(0, 4.0, 2.0), record(1, 1.0 / 3.0, std::nullopt), record(5, 1e-17, 1e-9)};
  t.meta.stop_reason = "max_iters";
  t.meta.config = ahb::SolverConfig{};
  t.meta.x0_seed = 42;
  const auto p = dir / "t.csv";
  ahb::write_csv(t, p);

  const std::string text = read_text(p);
  EXPECT_EQ(text.substr(0, text.find('\n')), "k,fval,gap,gnorm,alpha,beta,step_norm,dist");
  EXPECT_NE(text.find("\n1,0.33333333333333331,0.33333333333333331,0.10000000000000001,0.97999999999999998,"
                      "0.33333333333333331,1e-300,\n"),
            std::string::npos);

  const auto back = ahb::read_csv(p);
  ASSERT_EQ(back.records.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    const auto& a = t.records[i];
    const auto& b = back.records[i];
    EXPECT_EQ(a.k, b.k);
    EXPECT_EQ(a.fval, b.fval);
    EXPECT_EQ(a.gap, b.gap);
    EXPECT_EQ(a.gnorm, b.gnorm);
    EXPECT_EQ(a.alpha, b.alpha);
    EXPECT_EQ(a.beta, b.beta);
    EXPECT_EQ(a.step_norm, b.step_norm);
    EXPECT_EQ(a.dist, b.dist);
  }
  EXPECT_EQ(back.meta.stop_reason, "max_iters");
  EXPECT_EQ(back.meta.x0_seed, 42);
  EXPECT_EQ(back.meta.config.get<ahb::SolverConfig>(), ahb::SolverConfig{});
  EXPECT_FALSE(fs::exists(dir / "t.csv.tmp"));
}

TEST(TraceCsv, WriterRejectsBadTraces) {
  TempDir dir;
  ahb::Trace empty;
  EXPECT_THROW(ahb::write_csv(empty, dir / "e.csv"), ahb::InvalidInput);
  EXPECT_FALSE(fs::exists(dir / "e.csv"));
  ahb::Trace unordered;
  unordered.records = {record(3, 1, 1), record(3, 1, 1)};
  EXPECT_THROW(ahb::write_csv(unordered, dir / "u.csv"), ahb::InvalidInput);
  EXPECT_THROW(ahb::write_csv(ahb::Trace{{record(0, 1, 1)}, {}}, dir / "missing" / "x.csv"), ahb::IoError);
}

TEST(TraceCsv, ParseErrorsCarryLineNumbers) {
  TempDir dir;
  const std::string header = "k,fval,gap,gnorm,alpha,beta,step_norm,dist\n";
  struct Case {
    std::string body;
    std::size_t line;
  };
  const std::vector<Case> cases = {
      {"k,fval\n", 1},
      {header + "0,1,1,1,1,1,1,1\n1,1,1,1,1,1\n", 3},
      {header + "0,1,1,abc,1,1,1,\n", 2},
      {header + "0,1,1,1,1,1,1,1\n2,1,1,1,1,1,1,1\n2,1,1,1,1,1,1,1\n", 4},
      {header + "-1,1,1,1,1,1,1,1\n", 2},
      {header + "0,1,1,1,1,1,1,zz\n", 2},
      {header, 1},
      {"", 1},
  };
  for (const auto& c : cases) {
    const auto p = dir / "bad.csv";
    write_text(p, c.body);
    try {
      ahb::read_csv(p);
      ADD_FAILURE() << "no error for: " << c.body;
    } catch (const ahb::ParseError& e) {
      EXPECT_EQ(e.line(), c.line) << c.body;
    }
  }
  EXPECT_THROW(ahb::read_csv(dir / "absent.csv"), ahb::IoError);
}

TEST(TraceCsv, SolverTraceRoundTripsExactly) {
  TempDir dir;
  auto obj = ahb::make_quadratic({1.0, 10.0});
  ahb::SolverConfig cfg;
  cfg.method = ahb::Method::gd;  // contracts by 0.804 per step, so no early stop
  cfg.max_iters = 999;
  Eigen::VectorXd x0(2);
  x0 << 3, -2;
  const auto trace = ahb::run_solver(obj, cfg, x0);
  ASSERT_EQ(trace.records.size(), 1000u);
  const auto p = dir / "ahb.csv";
  ahb::write_csv(trace, p);
  const auto back = ahb::read_csv(p);
  EXPECT_EQ(ahb::render_csv(back), ahb::render_csv(trace));
  EXPECT_EQ(back.meta.config.get<ahb::SolverConfig>(), cfg);
  ASSERT_TRUE(back.meta.local_radius.has_value() == trace.meta.local_radius.has_value());
}

TEST(TraceMeta, SidecarContents) {
  TempDir dir;
  ahb::Trace t;
  t.records = {record(0, 1, 1)};
  t.meta.stop_reason = "gap_tol";
  t.meta.local_radius = 4.0;
  t.meta.problem = nlohmann::json{{"kind", "power"}};
  ahb::write_csv(t, dir / "m.csv");
  const auto j = nlohmann::json::parse(read_text(dir / "m.csv.meta.json"));
  EXPECT_EQ(j.at("stop_reason"), "gap_tol");
  EXPECT_EQ(j.at("local_radius"), 4.0);
  EXPECT_TRUE(j.at("x0_seed").is_null());
  EXPECT_EQ(j.at("problem").at("kind"), "power");

  write_text(dir / "m.csv.meta.json", "{not json");
  EXPECT_THROW(ahb::read_csv(dir / "m.csv"), ahb::ParseError);
  fs::remove(dir / "m.csv.meta.json");
  EXPECT_EQ(ahb::read_csv(dir / "m.csv").meta.stop_reason, "");
}

TEST(Summary, Examples) {
  ahb::Trace t;
  for (int k = 0; k < 50; ++k) {
    auto r = record(k, std::pow(0.5, k), 2.0 * std::pow(0.8, k));
    r.beta = k % 7 == 0 ? 0.0 : 0.25 + 0.01 * k;
    t.records.push_back(r);
  }
  t.meta.stop_reason = "max_iters";
  const auto s = ahb::summarize(t);
  EXPECT_EQ(s.iterations, 49);
  EXPECT_DOUBLE_EQ(s.final_gap, std::pow(0.5, 49));
  EXPECT_DOUBLE_EQ(*s.final_dist, 2.0 * std::pow(0.8, 49));
  EXPECT_EQ(s.min_beta, 0.0);
  EXPECT_DOUBLE_EQ(s.max_beta, 0.25 + 0.01 * 48);
  ASSERT_TRUE(s.linear_rate);
  EXPECT_NEAR(s.linear_rate->rate, 0.8, 1e-12);
  ASSERT_TRUE(s.power_rate);
  EXPECT_EQ(s.stop_reason, "max_iters");

  const nlohmann::json j = s;
  EXPECT_EQ(j.at("iterations"), 49);
  EXPECT_EQ(j.at("linear_rate").at("model"), "linear");

  ahb::Trace no_dist;
  no_dist.records = {record(0, 1, std::nullopt), record(1, 0.5, std::nullopt)};
  const auto s2 = ahb::summarize(no_dist);
  EXPECT_FALSE(s2.final_dist);
  EXPECT_FALSE(s2.linear_rate);
  EXPECT_TRUE(nlohmann::json(s2).at("final_dist").is_null());

  EXPECT_THROW(ahb::summarize(ahb::Trace{}), ahb::InvalidInput);
}
