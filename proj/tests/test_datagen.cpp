#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <random>
#include <vector>

#include "thermid/analysis.hpp"
#include "thermid/datagen.hpp"

using namespace thermid;
using Eigen::Vector2d;
using Eigen::Vector4d;

namespace {

std::filesystem::path temp_file(const char* name) {
  return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("generate_prbs") {
  SECTION("two levels inside the requested band") {
    const auto s = generate_prbs(22.0, 27.0, 6, 2016, 1);
    for (double v : s) REQUIRE((v == 22.0 || v == 27.0));
  }

  SECTION("constant over each bit period") {
    const int period = 6;
    const auto s = generate_prbs(0.0, 1.0, period, 600, 5);
    for (std::size_t k = 0; k < s.size(); ++k)
      if (k % period != 0) REQUIRE(s[k] == s[k - 1]);
  }

  SECTION("deterministic per seed") {
    REQUIRE(generate_prbs(22, 27, 6, 500, 42) ==
            generate_prbs(22, 27, 6, 500, 42));
    REQUIRE(generate_prbs(22, 27, 6, 500, 42) !=
            generate_prbs(22, 27, 6, 500, 43));
  }

  SECTION("the bit sequence is maximal length (period 1023)") {
    const auto s = generate_prbs(0.0, 1.0, 1, 3 * 1023, 7);
    for (std::size_t k = 0; k + 1023 < s.size(); ++k)
      REQUIRE(s[k] == s[k + 1023]);
    // no period that is a proper divisor of 1023 = 3 * 11 * 31
    for (std::size_t p : {341u, 93u, 33u, 31u, 11u, 3u, 1u}) {
      bool differs = false;
      for (std::size_t k = 0; k + p < 1023; ++k)
        if (s[k] != s[k + p]) {
          differs = true;
          break;
        }
      REQUIRE(differs);
    }
  }

  SECTION("invalid arguments") {
    REQUIRE_THROWS_AS(generate_prbs(27, 22, 6, 100, 1), std::invalid_argument);
    REQUIRE_THROWS_AS(generate_prbs(22, 27, 0, 100, 1), std::invalid_argument);
    REQUIRE_THROWS_AS(generate_prbs(22, 27, 6, 0, 1), std::invalid_argument);
  }
}

TEST_CASE("discretize_zoh matches step-by-step integration") {
  const auto ss = build_state_space({2, 4, 0.5, 1, 3});
  const double ts = 0.25;
  const auto zoh = discretize_zoh(ss, ts);

  // independent oracle: RK4 on the ODE with the input held constant
  const Vector2d x0{23.0, 27.0};
  const Vector4d in{-3.0, 31.0, 0.4, 2.0};
  auto f = [&](const Vector2d& x) -> Vector2d {
    return ss.F * x + ss.G * in.head<3>() + ss.H * in(3);
  };
  Vector2d x = x0;
  const int substeps = 4000;
  const double h = ts / substeps;
  for (int i = 0; i < substeps; ++i) {
    const Vector2d k1 = f(x);
    const Vector2d k2 = f(x + 0.5 * h * k1);
    const Vector2d k3 = f(x + 0.5 * h * k2);
    const Vector2d k4 = f(x + h * k3);
    x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  const Vector2d x1 = zoh.Ad * x0 + zoh.Bd * in;
  REQUIRE((x1 - x).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("simulate_open_loop") {
  const RcParams p = kReferenceParams;
  const auto ss = build_state_space(p);
  const double ts = kDefaultSamplingHours;

  SECTION("thermal equilibrium at ambient temperature") {
    const std::size_t n = 100;
    const double c = 25.0;
    std::vector<double> zeros(n, 0.0), toa(n, c);
    const auto d = simulate_open_loop(ss, zeros, toa, zeros, zeros, ts,
                                      Vector2d{c, c});
    for (double y : d.y) REQUIRE(y == Catch::Approx(c).margin(1e-12));
  }

  SECTION("bounded inputs give bounded outputs") {
    std::mt19937_64 rng(71);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const std::size_t n = 5000;
    std::vector<double> u1(n), u2(n), u3(n), w(n);
    for (std::size_t k = 0; k < n; ++k) {
      u1[k] = 10.0 * u(rng);
      u2[k] = 30.0 + 10.0 * u(rng);
      u3[k] = 0.5 * std::abs(u(rng));
      w[k] = 4.0 * std::abs(u(rng));
    }
    const auto d = simulate_open_loop(ss, u1, u2, u3, w, ts, Vector2d{24, 26});
    // steady-state envelope |Toa| + (Rz+Rw)(|q| + Ae*|sol| + |w|) plus a
    // generous transient allowance
    const double bound = 40.0 + 6.0 * (10.0 + 10.0 * 0.5 + 4.0) + 20.0;
    for (double y : d.y) REQUIRE(std::abs(y) < bound);
  }

  SECTION("unit hvac step settles at the q->Tz DC gain") {
    // start at equilibrium with Toa = 25, then add +1 kW of heat
    const std::size_t n = 30000;  // 2500 h >> slowest time constant
    const double c = 25.0;
    std::vector<double> ones(n, 1.0), toa(n, c), zeros(n, 0.0);
    const auto d =
        simulate_open_loop(ss, ones, toa, zeros, zeros, ts, Vector2d{c, c});
    const auto den = continuous_denominator(p);
    const double dc = -ss.F(1, 1) * ss.G(0, 0) / den.d2;
    REQUIRE(dc == Catch::Approx(p.Rz + p.Rw).epsilon(1e-12));
    REQUIRE(d.y.back() == Catch::Approx(c + dc * 1.0).margin(1e-6));
  }

  SECTION("one long run equals two chained half-runs") {
    std::mt19937_64 rng(73);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    const std::size_t n = 200, half = 120;
    std::vector<double> u1(n), u2(n), u3(n), w(n);
    for (std::size_t k = 0; k < n; ++k) {
      u1[k] = u(rng);
      u2[k] = 25.0 + u(rng);
      u3[k] = std::abs(u(rng)) / 10.0;
      w[k] = std::abs(u(rng));
    }
    const Vector2d x0{24, 26};
    const auto full = simulate_open_loop(ss, u1, u2, u3, w, ts, x0);

    auto head = [&](const std::vector<double>& v, std::size_t m) {
      return std::vector<double>(v.begin(), v.begin() + m);
    };
    auto tail_from = [&](const std::vector<double>& v, std::size_t m) {
      return std::vector<double>(v.begin() + m, v.end());
    };
    Vector2d x_mid;
    const auto first =
        simulate_open_loop(ss, head(u1, half), head(u2, half), head(u3, half),
                           head(w, half), ts, x0, &x_mid);
    // the second leg re-applies the input at the seam sample
    const auto second = simulate_open_loop(
        ss, tail_from(u1, half - 1), tail_from(u2, half - 1),
        tail_from(u3, half - 1), tail_from(w, half - 1), ts, x_mid);
    for (std::size_t k = 0; k < half; ++k)
      REQUIRE(full.y[k] == Catch::Approx(first.y[k]).margin(1e-12));
    for (std::size_t k = 0; k + half - 1 < n; ++k)
      REQUIRE(full.y[half - 1 + k] ==
              Catch::Approx(second.y[k]).margin(1e-12));
  }

  SECTION("dimension mismatch is rejected") {
    std::vector<double> a(5, 0.0), b(4, 0.0);
    REQUIRE_THROWS_AS(
        simulate_open_loop(ss, a, b, a, a, ts, Vector2d{0, 0}),
        std::invalid_argument);
  }
}

TEST_CASE("simulate_closed_loop") {
  const RcParams p = kReferenceParams;
  const auto ss = build_state_space(p);
  const double ts = kDefaultSamplingHours;

  SECTION("setpoint at equilibrium leaves the actuator idle") {
    const std::size_t n = 200;
    const double c = 25.0;
    std::vector<double> toa(n, c), zeros(n, 0.0), ref(n, c);
    const auto d = simulate_closed_loop(ss, toa, zeros, zeros, ref,
                                        kDefaultPi, ts, Vector2d{c, c});
    for (std::size_t k = 0; k < n; ++k) {
      // equilibrium holds to rounding of the state-transition products
      REQUIRE(std::abs(d.u1[k]) < 1e-10);
      REQUIRE(d.y[k] == Catch::Approx(c).margin(1e-10));
    }
    REQUIRE(d.has_setpoint());
  }

  SECTION("a pinched actuator reduces to the open loop") {
    const std::size_t n = 150;
    std::mt19937_64 rng(79);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> toa(n), sol(n), w(n), ref(n, 24.0), zeros(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
      toa[k] = 28.0 + 3.0 * u(rng);
      sol[k] = 0.3 * std::abs(u(rng));
      w[k] = 2.0 * std::abs(u(rng));
    }
    PiConfig pinched{5.0, 2.0, 0.0, 0.0};
    const Vector2d x0{24, 27};
    const auto cl =
        simulate_closed_loop(ss, toa, sol, w, ref, pinched, ts, x0);
    const auto ol = simulate_open_loop(ss, zeros, toa, sol, w, ts, x0);
    for (std::size_t k = 0; k < n; ++k) {
      REQUIRE(cl.u1[k] == 0.0);
      REQUIRE(cl.y[k] == Catch::Approx(ol.y[k]).margin(1e-12));
    }
  }

  SECTION("integral action removes the steady-state offset") {
    const std::size_t n = 6000;  // 500 h
    std::vector<double> toa(n, 32.0), sol(n, 0.3), w(n, 3.0), ref(n, 24.0);
    const auto d = simulate_closed_loop(ss, toa, sol, w, ref, kDefaultPi, ts,
                                        Vector2d{24, 28});
    REQUIRE(std::abs(d.y.back() - 24.0) < 0.01);
    REQUIRE(d.u1.back() < 0.0);
    REQUIRE(d.u1.back() > kDefaultPi.u_min);
  }
}

TEST_CASE("synth_weather") {
  const double ts = kDefaultSamplingHours;

  SECTION("solar irradiance is never negative") {
    for (std::uint64_t seed : {1ull, 2ull, 99ull}) {
      const auto [toa, sol] = synth_weather(2016, ts, seed);
      for (double v : sol) REQUIRE(v >= 0.0);
    }
  }

  SECTION("deterministic per seed") {
    const auto a = synth_weather(500, ts, 11);
    const auto b = synth_weather(500, ts, 11);
    REQUIRE(a.first == b.first);
    REQUIRE(a.second == b.second);
  }

  SECTION("seeds differ but share the daily structure") {
    const std::size_t n = 2016, day = 288;
    const auto a = synth_weather(n, ts, 21);
    const auto b = synth_weather(n, ts, 22);
    REQUIRE(a.first != b.first);
    for (std::size_t d = 0; d < n / day; ++d) {
      double ma = 0.0, mb = 0.0;
      for (std::size_t k = 0; k < day; ++k) {
        ma += a.first[d * day + k];
        mb += b.first[d * day + k];
      }
      ma /= day;
      mb /= day;
      REQUIRE(std::abs(ma - mb) / std::abs(ma) < 0.2);
    }
  }
}

TEST_CASE("make_disturbance") {
  const double ts = kDefaultSamplingHours;
  const std::size_t week = 2016;

  SECTION("piecewise kind: rare transitions, exact plateaus, bounded") {
    DisturbanceProfile prof;
    prof.kind = DisturbanceProfile::Kind::PiecewiseConstant;
    prof.peak_kw = 4.0;
    const auto w = make_disturbance(prof, week, ts, 31);
    REQUIRE(change_frequency(w) <= 0.02);
    std::size_t plateau_pairs = 0;
    for (std::size_t k = 1; k < w.size(); ++k)
      if (w[k] == w[k - 1]) ++plateau_pairs;
    REQUIRE(plateau_pairs > w.size() * 9 / 10);
    for (double v : w) {
      REQUIRE(std::abs(v) <= prof.peak_kw);
      REQUIRE(v >= 0.0);
    }
    REQUIRE(make_disturbance(prof, week, ts, 31) == w);
  }

  SECTION("smooth kind varies strictly during business hours") {
    DisturbanceProfile prof;
    prof.kind = DisturbanceProfile::Kind::Smooth;
    prof.peak_kw = 4.0;
    const auto w = make_disturbance(prof, week, ts, 33);
    for (double v : w) REQUIRE(std::abs(v) <= prof.peak_kw);
    // day 2, 09:30 - 16:30
    const std::size_t from = 288 + static_cast<std::size_t>(9.5 * 12);
    const std::size_t to = 288 + static_cast<std::size_t>(16.5 * 12);
    const std::span<const double> business(w.data() + from, to - from);
    REQUIRE(change_frequency(business) == 1.0);
    // overall the signal still has flat nights
    REQUIRE(change_frequency(w) < 1.0);
  }
}

TEST_CASE("CSV round-trip and schema enforcement") {
  TimeSeriesDataset d;
  d.t_s = kDefaultSamplingHours;
  std::mt19937_64 rng(83);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  for (int k = 0; k < 37; ++k) {
    d.u1.push_back(u(rng));
    d.u2.push_back(u(rng) + 25.0);
    d.u3.push_back(std::abs(u(rng)) / 10.0);
    d.y.push_back(u(rng) + 24.0);
    d.w.push_back(std::abs(u(rng)));
    d.setpoint.push_back(24.0 + u(rng) / 10.0);
  }

  SECTION("write then load is lossless") {
    const auto path = temp_file("thermid_roundtrip.csv");
    write_csv(d, path);
    const auto back = load_csv(path, d.t_s);
    REQUIRE(back.size() == d.size());
    REQUIRE(back.u1 == d.u1);
    REQUIRE(back.u2 == d.u2);
    REQUIRE(back.u3 == d.u3);
    REQUIRE(back.y == d.y);
    REQUIRE(back.w == d.w);
    REQUIRE(back.setpoint == d.setpoint);
    std::filesystem::remove(path);
  }

  SECTION("optional columns are really optional") {
    TimeSeriesDataset no_extras = d;
    no_extras.w.clear();
    no_extras.setpoint.clear();
    const auto path = temp_file("thermid_noextras.csv");
    write_csv(no_extras, path);
    const auto back = load_csv(path, d.t_s);
    REQUIRE_FALSE(back.has_w());
    REQUIRE_FALSE(back.has_setpoint());
    std::filesystem::remove(path);
  }

  SECTION("missing required column is named in the error") {
    const auto path = temp_file("thermid_missing.csv");
    std::ofstream out(path);
    out << "k,qhvac_kW,Toa_C,etasol_kWm2\n1,0,25,0\n2,0,25,0\n3,0,25,0\n";
    out.close();
    REQUIRE_THROWS_WITH(load_csv(path),
                        Catch::Matchers::ContainsSubstring("Tz_C"));
    std::filesystem::remove(path);
  }

  SECTION("unknown columns are ignored") {
    const auto path = temp_file("thermid_extra.csv");
    std::ofstream out(path);
    out << "k,qhvac_kW,Toa_C,etasol_kWm2,Tz_C,humidity\n";
    out << "1,0,25,0,24,0.5\n2,0,25,0,24,0.5\n3,-1,26,0.1,23.5,0.6\n";
    out.close();
    const auto back = load_csv(path);
    REQUIRE(back.size() == 3);
    REQUIRE(back.u2[2] == 26.0);
    std::filesystem::remove(path);
  }

  SECTION("non-numeric cells are located precisely") {
    const auto path = temp_file("thermid_bad.csv");
    std::ofstream out(path);
    out << "k,qhvac_kW,Toa_C,etasol_kWm2,Tz_C\n";
    out << "1,0,25,0,24\n2,0,oops,0,24\n3,0,25,0,24\n";
    out.close();
    REQUIRE_THROWS_WITH(load_csv(path),
                        Catch::Matchers::ContainsSubstring("row 3") &&
                            Catch::Matchers::ContainsSubstring("column 3"));
    std::filesystem::remove(path);
  }

  SECTION("ragged rows are rejected") {
    const auto path = temp_file("thermid_ragged.csv");
    std::ofstream out(path);
    out << "k,qhvac_kW,Toa_C,etasol_kWm2,Tz_C\n";
    out << "1,0,25,0,24\n2,0,25,0\n3,0,25,0,24\n";
    out.close();
    REQUIRE_THROWS_AS(load_csv(path), std::runtime_error);
    std::filesystem::remove(path);
  }
}
