#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "labelmend/config.hpp"
#include "labelmend/error.hpp"
#include "labelmend/synth.hpp"

using namespace labelmend;
namespace fs = std::filesystem;

TEST_SUITE("config") {

TEST_CASE("file values override defaults; sections become dotted keys") {
  const fs::path path = fs::temp_directory_path() / "labelmend_cfg.toml";
  std::ofstream out(path);
  out << "# pipeline settings\n"
      << "theta = 0.02\n"
      << "superpixel_count = 250\n"
      << "edge_symmetrize = and\n"
      << "[gat]\n"
      << "heads = 4\n"
      << "lr = 0.01\n";
  out.close();
  const PipelineConfig cfg = PipelineConfig::from_file(path);
  REQUIRE(cfg.theta.has_value());
  CHECK(*cfg.theta == doctest::Approx(0.02));
  CHECK(cfg.superpixel_count == 250);
  CHECK(cfg.edge_symmetrize == EdgeSymmetrize::kAnd);
  CHECK(cfg.gat_heads == 4);
  CHECK(cfg.gat_lr == doctest::Approx(0.01));
  // untouched fields keep their defaults
  CHECK(cfg.bg_thresh == doctest::Approx(0.05));
  CHECK(cfg.gat_epochs == 300);
}

TEST_CASE("theta accepts 'auto' and unknown keys are rejected") {
  PipelineConfig cfg;
  cfg.apply("theta", "0.5");
  CHECK(cfg.theta.has_value());
  cfg.apply("theta", "auto");
  CHECK_FALSE(cfg.theta.has_value());
  try {
    cfg.apply("no_such_key", "1");
    FAIL("expected ConfigError");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::config_error);
  }
  CHECK_THROWS_AS(cfg.apply("gat.lr", "fast"), Error);
}

TEST_CASE("default theta grid: 40 log-spaced values over [1e-5, 1e-1]") {
  const PipelineConfig cfg;
  const auto grid = cfg.theta_grid();
  REQUIRE(grid.size() == 40);
  CHECK(grid.front() == doctest::Approx(1e-5));
  CHECK(grid.back() == doctest::Approx(1e-1));
  const double ratio = grid[1] / grid[0];
  for (std::size_t i = 2; i < grid.size(); ++i)
    CHECK(grid[i] / grid[i - 1] == doctest::Approx(ratio).epsilon(1e-9));
}

TEST_CASE("scene suite file round-trips through the parser") {
  const fs::path path = fs::temp_directory_path() / "labelmend_scene.toml";
  std::ofstream out(path);
  out << "[suite]\nimages = 6\nseed = 99\n"
      << "[canvas]\nheight = 96\nwidth = 80\nclasses = 4\n"
      << "[shapes]\ncount = 3\nmin_radius = 9\nmax_radius = 20\n"
      << "[noise]\ndilate = 3\nshift = 4\nflip = 0.01\n"
      << "[fidelity]\ncorrect = 0.92\nincorrect = 0.41\n";
  out.close();
  const SuiteSpec s = parse_suite_file(path);
  CHECK(s.images == 6);
  CHECK(s.seed == 99);
  CHECK(s.height == 96);
  CHECK(s.width == 80);
  CHECK(s.num_classes == 4);
  CHECK(s.shapes_per_image == 3);
  CHECK(s.min_radius == doctest::Approx(9));
  CHECK(s.noise.dilate_px == 3);
  CHECK(s.noise.shift_px == 4);
  CHECK(s.noise.flip_fraction == doctest::Approx(0.01));
  CHECK(s.fidelity.correct == doctest::Approx(0.92));
  CHECK(s.fidelity.incorrect == doctest::Approx(0.41));
}

TEST_CASE("malformed lines carry the file location") {
  const fs::path path = fs::temp_directory_path() / "labelmend_bad.toml";
  std::ofstream out(path);
  out << "theta 0.5\n";
  out.close();
  try {
    PipelineConfig::from_file(path);
    FAIL("expected ConfigError");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find(":1") != std::string::npos);
  }
}

}  // TEST_SUITE
