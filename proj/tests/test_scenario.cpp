#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "wpmr/scenario.hpp"

using namespace wpmr;

TEST_CASE("path loss follows the log-distance model") {
    NetworkScenario sc;
    CHECK(sc.path_loss_db(1.0) == Catch::Approx(25.0).margin(1e-12));
    // 25 + 20*log10(2), evaluated independently and frozen.
    CHECK(sc.path_loss_db(2.0) == Catch::Approx(31.02059991327962).margin(1e-10));
    CHECK(sc.path_loss_db(10.0) == Catch::Approx(45.0).margin(1e-10));
    CHECK_THROWS_AS(sc.path_loss_db(0.0), error);
    CHECK_THROWS_AS(sc.path_loss_db(-1.0), error);

    Rng rng(7);
    for (int rep = 0; rep < 200; ++rep) {
        const double a = 0.1 + 20.0 * rng.uniform();
        const double b = a + 1e-6 + 5.0 * rng.uniform();
        CHECK(sc.path_loss_db(a) < sc.path_loss_db(b));
    }
}

TEST_CASE("noise normalization and its round trip") {
    NetworkScenario sc;
    CHECK(sc.noise_watts() == Catch::Approx(1e-7).epsilon(1e-12));
    CHECK(sc.p_o() == Catch::Approx(5e5).epsilon(1e-12));
    // converting the normalized power back to milliwatts is the identity
    const double back_mw = sc.p_o() * sc.noise_watts() * 1e3;
    CHECK(back_mw == Catch::Approx(sc.p_o_mw).epsilon(1e-12));
}

TEST_CASE("channel draws are deterministic in the seed") {
    NetworkScenario sc;
    Rng r1(42), r2(42);
    const ChannelRealization a = draw_channels(sc, r1);
    const ChannelRealization b = draw_channels(sc, r2);
    REQUIRE(a.f.size() == b.f.size());
    for (std::size_t i = 0; i < a.f.size(); ++i)
        for (std::size_t j = 0; j < a.f[i].size(); ++j)
            CHECK(a.f[i][j] == b.f[i][j]);
    for (std::size_t i = 0; i < a.g.size(); ++i) CHECK(a.g[i] == b.g[i]);

    Rng r3(43);
    const ChannelRealization c = draw_channels(sc, r3);
    CHECK(a.f[0][0] != c.f[0][0]);
}

TEST_CASE("empirical channel variance matches the path-loss value") {
    NetworkScenario sc;
    const int trials = 100000;
    Rng rng(11);
    double sum_f0 = 0.0, sum_g2 = 0.0;
    for (int t = 0; t < trials; ++t) {
        const ChannelRealization r = draw_channels(sc, rng);
        sum_f0 += std::norm(r.f[0][0]);
        sum_g2 += std::norm(r.g[2]);
    }
    CHECK(sum_f0 / trials == Catch::Approx(sc.channel_var(sc.d_f[0])).epsilon(0.02));
    CHECK(sum_g2 / trials == Catch::Approx(sc.channel_var(sc.d_g[2])).epsilon(0.02));
}

TEST_CASE("cross-channel moment matrices are well formed") {
    NetworkScenario sc;
    Rng rng(3);
    for (int rep = 0; rep < 50; ++rep) {
        const ChannelRealization r = draw_channels(sc, rng);
        REQUIRE(static_cast<int>(r.sigma.size()) == sc.m_cues);
        for (const CMat& sig : r.sigma) {
            REQUIRE(sig.dim() == sc.n_relays + 1);
            CHECK(sig(sc.n_relays, sc.n_relays) == cxd(1.0, 0.0));
            CHECK(is_psd(sig));
        }
    }

    NetworkScenario flat = sc;
    flat.u_scale = 0.0;
    const ChannelRealization r0 = draw_channels(flat, rng);
    CHECK(r0.s[0].frobenius() == 0.0);
    const EigResult e = eig_hermitian(r0.sigma[0]);
    int positive = 0;
    for (double v : e.values)
        if (v > 1e-12) ++positive;
    CHECK(positive <= 2);
}

TEST_CASE("nonlinear harvester shape") {
    NetworkScenario sc;
    sc.eh_model = EhModel::nonlinear;
    const NonlinearEhModel m = nonlinear_model(sc);
    REQUIRE(static_cast<int>(m.nu.size()) == sc.n_relays);
    for (int n = 0; n < sc.n_relays; ++n) {
        CHECK(m.nu[n] > 0.0);
        CHECK(m.omega[n] > 0.0);
        CHECK(m.omega[n] < 1.0);

        CHECK(nonlinear_eh(0.0, m, n) == 0.0);

        // logistic midpoint, evaluated from the model constants directly
        const double mid = (m.nu[n] / 2.0 - m.nu[n] * m.omega[n]) / (1.0 - m.omega[n]);
        CHECK(nonlinear_eh(m.b[n], m, n) == Catch::Approx(mid).epsilon(1e-12));

        CHECK(nonlinear_eh(100.0 * m.b[n], m, n) == Catch::Approx(m.nu[n]).epsilon(0.01));

        double prev = -1.0;
        for (int step = 0; step <= 200; ++step) {
            const double p = step * (3.0 * m.b[n]) / 200.0;
            const double v = nonlinear_eh(p, m, n);
            CHECK(v >= prev - 1e-15);
            CHECK(v <= m.nu[n] * 1.0001);
            prev = v;
        }
    }
    CHECK_THROWS_AS(nonlinear_eh(-1.0, m, 0), error);
    CHECK_THROWS_AS(nonlinear_eh(1.0, m, 99), error);
}

TEST_CASE("scenario files parse with diagnostics") {
    const std::string good =
        "# example scenario\n"
        "k = 4\n"
        "n_relays = 2\n"
        "m_cues = 2\n"
        "d_f = 2, 3\n"
        "d_g = 2.5, 2.5\n"
        "d_z = 3, 3; 4, 5   # one row per cue\n"
        "alpha = 2.2\n"
        "l0_db = 25\n"
        "noise_density_dbm_hz = -90\n"
        "bandwidth_hz = 1e5\n"
        "eta = 0.6\n"
        "p_o_mw = 30\n"
        "zeta = 0.25\n"
        "phi_bar = 1.5\n"
        "u_scale = 2\n"
        "eh_model = nonlinear\n"
        "eh_nu = 100, 100\n"
        "eh_a = 0.2, 0.2\n"
        "eh_b = 50, 40\n"
        "epsilon = 1e-4\n"
        "seed = 9\n";
    const NetworkScenario sc = parse_scenario_text(good, "good.scn");
    CHECK(sc.k == 4);
    CHECK(sc.n_relays == 2);
    CHECK(sc.m_cues == 2);
    CHECK(sc.d_f == std::vector<double>{2.0, 3.0});
    REQUIRE(sc.d_z.size() == 2);
    CHECK(sc.d_z[1] == std::vector<double>{4.0, 5.0});
    CHECK(sc.alpha == 2.2);
    CHECK(sc.eta == 0.6);
    CHECK(sc.p_o_mw == 30.0);
    CHECK(sc.zeta == 0.25);
    CHECK(sc.phi_bar == 1.5);
    CHECK(sc.u_scale == 2.0);
    CHECK(sc.eh_model == EhModel::nonlinear);
    CHECK(sc.eh_b == std::vector<double>{50.0, 40.0});
    CHECK(sc.epsilon == 1e-4);
    CHECK(sc.seed == 9);

    auto expect_message = [](const std::string& text, const std::string& needle) {
        try {
            parse_scenario_text(text, "bad.scn");
            FAIL("expected a parse error");
        } catch (const error& e) {
            CHECK(std::string(e.what()).find(needle) != std::string::npos);
        }
    };
    expect_message("k = 3\nwibble = 1\n", "bad.scn:2: unknown key 'wibble'");
    expect_message("eta\n", "bad.scn:1: expected `key = value`");
    expect_message("eta = fast\n", "bad number 'fast'");
    expect_message("k = 2\nk = 3\n", "bad.scn:2: duplicate key 'k'");
    expect_message("k = 2.5\n", "expected an integer");
    expect_message("eh_model = solar\n", "eh_model must be");
    expect_message("eta = 0\n", "eta must be in (0, 1]");
    expect_message("d_f = 1, 2\n", "d_f needs one entry per relay");
    expect_message("zeta = 1.5\n", "zeta must be in (0, 1]");
}

TEST_CASE("scenario invariants are enforced") {
    NetworkScenario sc;
    sc.d_g[1] = -1.0;
    CHECK_THROWS_AS(sc.validate(), error);
    sc = NetworkScenario{};
    sc.epsilon = 0.0;
    CHECK_THROWS_AS(sc.validate(), error);
    sc = NetworkScenario{};
    sc.d_z.clear();
    CHECK_THROWS_AS(sc.validate(), error);
    sc = NetworkScenario{};
    sc.eh_nu = {1.0};  // wrong length for three relays
    CHECK_THROWS_AS(sc.validate(), error);
}
