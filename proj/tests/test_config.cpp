#include <doctest.h>

#include <string>
#include <stdexcept>

#include "rasba/config.hpp"

using rasba::ConfigError;
using rasba::ExperimentConfig;

namespace {

std::string error_of(const std::string& text) {
  try {
    rasba::parse_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("shipped default.cfg equals the built-in defaults") {
  const auto loaded = rasba::load_config(RASBA_SOURCE_DIR "/configs/default.cfg");
  CHECK(rasba::to_config_text(loaded) == rasba::to_config_text(ExperimentConfig{}));
  const auto fc = loaded.federation();
  CHECK(fc.m == 10);
  CHECK(fc.f == 0.5);
  CHECK(fc.b_min_init == 4);
  CHECK(fc.b_max_init == 64);
  CHECK(fc.rounds == 25);
  CHECK(fc.strategy == rasba::Strategy::rasba());
}

TEST_CASE("an empty config is all defaults") {
  CHECK(rasba::to_config_text(rasba::parse_config("")) == rasba::to_config_text(ExperimentConfig{}));
  CHECK(rasba::to_config_text(rasba::parse_config("# nothing\n\n   \n")) ==
        rasba::to_config_text(ExperimentConfig{}));
}

TEST_CASE("values are parsed with comments and whitespace") {
  const auto c = rasba::parse_config(
      "m = 6   # clients\n"
      "f=0.3\n"
      "strategy = fixed(32)\n"
      "hardware_tiers = 2048, 4096\n"
      "sweep_batches = 8,16\n"
      "mc_searchers = 1,3\n");
  CHECK(c.m == 6);
  CHECK(c.f == 0.3);
  CHECK(c.strategy == rasba::Strategy::fixed(32));
  CHECK(c.hardware_tiers == std::vector<double>{2048, 4096});
  CHECK(c.sweep_batches == std::vector<rasba::BatchSize>{8, 16});
}

TEST_CASE("unknown keys are rejected with their line") {
  const auto msg = error_of("m = 10\n\nbogus = 3\n");
  CHECK(msg.find("line 3") != std::string::npos);
  CHECK(msg.find("bogus") != std::string::npos);
}

TEST_CASE("b_min above b_max names both keys") {
  const auto msg = error_of("b_min = 128\nb_max = 64\n");
  CHECK(msg.find("b_min") != std::string::npos);
  CHECK(msg.find("b_max") != std::string::npos);
  CHECK(msg.find("line 1") != std::string::npos);
}

TEST_CASE("malformed input is a config error") {
  CHECK(error_of("m = 10\nm = 12\n").find("duplicate") != std::string::npos);
  CHECK(error_of("m =\n").find("missing value") != std::string::npos);
  CHECK(error_of("just words\n").find("line 1") != std::string::npos);
  CHECK(error_of("f = half\n").find("f") != std::string::npos);
  CHECK(error_of("f = 1.0\n").find("line 1: f") != std::string::npos);
  CHECK(error_of("strategy = greedy\n").find("strategy") != std::string::npos);
  CHECK(error_of("m = 2.5\n").find("m") != std::string::npos);
  CHECK(error_of("lr = nan\n").find("lr") != std::string::npos);
  CHECK(error_of("features_csv = x.csv\n").find("labels_csv") != std::string::npos);
  CHECK(error_of("m = 100\n").find("min_shard") != std::string::npos);
  CHECK_FALSE(error_of("m = 1\nf = 0\nmc_searchers = 1\n").size() > 0);
  CHECK(error_of("m = 1\nmc_searchers = 1\n").rfind("f: ", 0) == 0);  // no searcher left; f was not set on any line
}

TEST_CASE("loading a missing file is a config error") {
  CHECK_THROWS_AS(rasba::load_config("/nonexistent/rasba.cfg"), ConfigError);
}

TEST_CASE("resolved config text round-trips") {
  ExperimentConfig c;
  c.m = 7;
  c.f = 1.0 / 3.0;
  c.lr = 0.123456789012345678;
  c.t_fixed_s = 1.5e-3;
  c.strategy = rasba::Strategy::single_prober();
  c.hardware_tiers = {5000.5, 9000.25};
  c.seed = 18446744073709551615ULL;
  c.mc_searchers = {1, 7};
  const auto text = rasba::to_config_text(c);
  const auto back = rasba::parse_config(text);
  CHECK(rasba::to_config_text(back) == text);
  CHECK(back.f == c.f);
  CHECK(back.lr == c.lr);
  CHECK(back.seed == c.seed);
}
