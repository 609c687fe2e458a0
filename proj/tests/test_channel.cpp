#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <filesystem>

#include "cfnoma/channel.hpp"
#include "doctest.h"

using namespace cfnoma;

TEST_CASE("correlation matrix: zero correlation is the identity") {
  Rng rng(1);
  const Eigen::MatrixXcd r = correlation_matrix(3, 0.0, rng);
  CHECK((r - Eigen::MatrixXcd::Identity(3, 3)).norm() == doctest::Approx(0.0));
}

TEST_CASE("correlation matrix: phi = 0 gives a real symmetric matrix") {
  const double corr = 1.0 - 1e-3;
  const Eigen::MatrixXcd r = correlation_matrix(2, corr, 0.0);
  CHECK(r(0, 1).real() == doctest::Approx(corr));
  CHECK(r(0, 1).imag() == doctest::Approx(0.0));
  CHECK(r(1, 0).real() == doctest::Approx(corr));
}

TEST_CASE("correlation matrix: direct formula evaluation at phi = pi/4") {
  const double corr = 0.6;
  const double phi = M_PI / 4.0;
  const Eigen::MatrixXcd r = correlation_matrix(3, corr, phi);
  const std::complex<double> base =
      corr * std::exp(std::complex<double>(0.0, phi));
  for (int i = 0; i < 3; ++i)
    for (int k = i; k < 3; ++k) {
      std::complex<double> expected = std::pow(base, k - i);
      CHECK(std::abs(r(i, k) - expected) < 1e-12);
      CHECK(std::abs(r(k, i) - std::conj(expected)) < 1e-12);
    }
  CHECK((r - r.adjoint()).norm() == doctest::Approx(0.0));
}

TEST_CASE("correlation matrix rejects corr outside [0, 1)") {
  Rng rng(1);
  CHECK_THROWS_AS(correlation_matrix(3, 1.0, rng), ConfigError);
  CHECK_THROWS_AS(correlation_matrix(3, -0.1, rng), ConfigError);
}

TEST_CASE("matrix square root reproduces the clipped matrix") {
  Rng rng(7);
  for (double corr : {0.3, 0.6, 0.9}) {
    const Eigen::MatrixXcd r = correlation_matrix(6, corr, rng);
    double clip = 0.0;
    const Eigen::MatrixXcd s = correlation_sqrt(r, &clip);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(r);
    Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0);
    const Eigen::MatrixXcd clipped =
        es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().adjoint();
    CHECK((s * s.adjoint() - clipped).norm() < 1e-9);
  }
}

TEST_CASE("pathloss") {
  NetworkConfig cfg;
  CHECK(pathloss(0.0, cfg) == doctest::Approx(1.0));
  CHECK(pathloss(cfg.ref_distance, cfg) == doctest::Approx(0.125));
  CHECK(pathloss(3.0 * cfg.ref_distance, cfg) == doctest::Approx(1.0 / 64.0));
  CHECK_THROWS_AS(pathloss(-1.0, cfg), ConfigError);
}

TEST_CASE("sample_channels: user ordering invariant") {
  NetworkConfig cfg;
  cfg.num_bs = 3;
  cfg.users_per_bs = 5;
  cfg.num_antennas = 4;
  for (std::uint64_t seed : {1ull, 2ull, 3ull, 4ull}) {
    Rng rng(seed);
    const ChannelSet cs = sample_channels(cfg, rng);
    for (int m = 0; m < cfg.num_bs; ++m)
      for (int k = 0; k + 1 < cfg.users_per_bs; ++k)
        CHECK(cs.h[m][m][k].norm() <= cs.h[m][m][k + 1].norm());
  }
}

TEST_CASE("sample_channels: purity in (cfg, seed)") {
  NetworkConfig cfg;
  cfg.num_bs = 2;
  cfg.users_per_bs = 3;
  cfg.num_antennas = 2;
  Rng a(42), b(42);
  const ChannelSet ca = sample_channels(cfg, a);
  const ChannelSet cb = sample_channels(cfg, b);
  for (int m = 0; m < 2; ++m)
    for (int n = 0; n < 2; ++n)
      for (int k = 0; k < 3; ++k)
        CHECK(ca.h[m][n][k] == cb.h[m][n][k]);
}

TEST_CASE("sample_channels: iid entries when corr = 0, Monte-Carlo covariance") {
  NetworkConfig cfg;
  cfg.num_bs = 2;
  cfg.users_per_bs = 2;
  cfg.num_antennas = 4;
  cfg.corr_data = 0.0;
  cfg.corr_interf = 0.0;
  const int draws = 10000;
  Rng rng(5);
  // measure the interference channels h[0][1][.]: the per-cell gain sort is
  // driven by the data channels only, so these stay iid CN(0, 1)
  Eigen::MatrixXcd cov = Eigen::MatrixXcd::Zero(2, 2);
  double var = 0.0;
  for (int d = 0; d < draws; ++d) {
    const ChannelSet cs = sample_channels(cfg, rng);
    Eigen::Vector2cd v{cs.h[0][1][0](0), cs.h[0][1][1](0)};
    cov += v * v.adjoint();
    var += cs.h[0][1][0].squaredNorm() / cfg.num_antennas;
  }
  cov /= draws;
  var /= draws;
  CHECK(std::abs(var - 1.0) < 0.05);
  CHECK(std::abs(cov(0, 0).real() - 1.0) < 0.05);
  CHECK(std::abs(cov(1, 1).real() - 1.0) < 0.05);
  CHECK(std::abs(cov(0, 1)) < 0.05);
}

TEST_CASE("sample_channels: correlated draws match the requested correlation") {
  NetworkConfig cfg;
  cfg.num_bs = 1;
  cfg.users_per_bs = 2;
  cfg.num_antennas = 64;  // wide so the gain sort rarely swaps... it still
  cfg.corr_data = 0.7;    // may; measure |corr| which is sort-invariant
  const int draws = 4000;
  Rng rng(11);
  double acc = 0.0;
  for (int d = 0; d < draws; ++d) {
    const ChannelSet cs = sample_channels(cfg, rng);
    std::complex<double> c(0.0, 0.0);
    double p0 = 0.0, p1 = 0.0;
    for (int t = 0; t < cfg.num_antennas; ++t) {
      c += cs.h[0][0][0](t) * std::conj(cs.h[0][0][1](t));
      p0 += std::norm(cs.h[0][0][0](t));
      p1 += std::norm(cs.h[0][0][1](t));
    }
    acc += std::abs(c) / std::sqrt(p0 * p1);
  }
  acc /= draws;
  CHECK(acc > 0.6);
  CHECK(acc < 0.8);
}

TEST_CASE("pathloss scales interference channels") {
  NetworkConfig cfg;
  cfg.num_bs = 2;
  cfg.users_per_bs = 2;
  cfg.num_antennas = 2;
  cfg.distances.resize(2, 2);
  cfg.distances << 0.0, 3.0, 3.0, 0.0;  // cross channels at distance 3 d0
  const int draws = 2000;
  Rng rng(3);
  double data_p = 0.0, cross_p = 0.0;
  for (int d = 0; d < draws; ++d) {
    const ChannelSet cs = sample_channels(cfg, rng);
    data_p += cs.h[0][0][0].squaredNorm();
    cross_p += cs.h[0][1][0].squaredNorm();
  }
  // loss = (1 + 3)^-3 = 1/64
  CHECK(cross_p / data_p == doctest::Approx(1.0 / 64.0).epsilon(0.15));
}

TEST_CASE("make_dataset: determinism and shape") {
  NetworkConfig cfg;
  cfg.num_bs = 2;
  cfg.users_per_bs = 2;
  cfg.num_antennas = 2;
  const Dataset a = make_dataset(cfg, 10, 8, 99);
  const Dataset b = make_dataset(cfg, 10, 8, 99);
  CHECK(a.num_batches() == 10);
  CHECK(a.batch_size() == 8);
  CHECK(a.num_samples() == 80);
  for (int i = 0; i < a.num_batches(); ++i)
    for (int s = 0; s < a.batch_size(); ++s)
      CHECK(a.batches[i][s].h[0][1][0] == b.batches[i][s].h[0][1][0]);
}

TEST_CASE("renew keeps shape, changes draws") {
  NetworkConfig cfg;
  cfg.num_bs = 2;
  cfg.users_per_bs = 2;
  cfg.num_antennas = 2;
  const Dataset a = make_dataset(cfg, 3, 4, 7);
  Rng rng(123);
  const Dataset b = renew(a, rng);
  CHECK(b.num_batches() == a.num_batches());
  CHECK(b.batch_size() == a.batch_size());
  CHECK(b.split == a.split);
  CHECK(a.batches[0][0].h[0][0][0] != b.batches[0][0].h[0][0][0]);
}

TEST_CASE("dataset persistence round trip") {
  NetworkConfig cfg;
  cfg.num_bs = 2;
  cfg.users_per_bs = 2;
  cfg.num_antennas = 3;
  const Dataset a = make_dataset(cfg, 2, 3, 17, "val");
  const std::string path =
      (std::filesystem::temp_directory_path() / "cfnoma_ds_test.json").string();
  save_dataset(path, a, cfg);
  NetworkConfig loaded_cfg;
  const Dataset b = load_dataset(path, &loaded_cfg);
  CHECK(loaded_cfg.num_bs == 2);
  CHECK(loaded_cfg.users_per_bs == 2);
  CHECK(loaded_cfg.num_antennas == 3);
  CHECK(b.split == "val");
  CHECK(b.seed == a.seed);
  REQUIRE(b.num_batches() == a.num_batches());
  for (int i = 0; i < a.num_batches(); ++i)
    for (int s = 0; s < a.batch_size(); ++s)
      for (int m = 0; m < 2; ++m)
        for (int n = 0; n < 2; ++n)
          for (int k = 0; k < 2; ++k)
            CHECK(a.batches[i][s].h[m][n][k] == b.batches[i][s].h[m][n][k]);
  std::filesystem::remove(path);
}

TEST_CASE("config validation") {
  NetworkConfig cfg;
  cfg.corr_data = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.corr_data = 0.5;
  cfg.num_bs = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.num_bs = 3;
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.power_budget() ==
        doctest::Approx(cfg.users_per_bs * std::pow(10.0, cfg.snr_db / 10.0)));
}

TEST_CASE("hex layout distances") {
  const Eigen::MatrixXd d = hex_layout_distances(7, 2.0);
  CHECK(d.rows() == 7);
  CHECK(d(0, 0) == doctest::Approx(0.0));
  for (int i = 1; i < 7; ++i) CHECK(d(0, i) == doctest::Approx(2.0));
  CHECK((d - d.transpose()).norm() == doctest::Approx(0.0));
}
