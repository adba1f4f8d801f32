#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "wpmr/chance.hpp"

using namespace wpmr;

namespace {

MomentAmbiguitySet markov_unit_set(double phi_bar, double zeta = 0.3) {
    // n = 1, u = 0, E|z|^2 = 1
    MomentAmbiguitySet amb;
    amb.sigma = CMat::identity(2);
    amb.phi_bar = phi_bar;
    amb.zeta = zeta;
    return amb;
}

// Random lifted moment matrix; real (u = 0, real spread vectors) or fully
// complex.
MomentAmbiguitySet random_amb(Rng& rng, int n, bool complex_moments, double phi_bar,
                              double zeta = 0.3) {
    CVec u(n, cxd(0.0, 0.0));
    if (complex_moments)
        for (int i = 0; i < n; ++i) u[i] = rng.cnormal(0.3);
    CMat s(n);
    for (int k = 0; k < 2; ++k) {
        CVec v(n);
        for (int i = 0; i < n; ++i)
            v[i] = complex_moments ? rng.cnormal(1.0) : cxd(rng.normal(), 0.0);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) s(i, j) += 0.4 * v[i] * std::conj(v[j]);
    }
    for (int i = 0; i < n; ++i) s(i, i) += 0.05 + 0.5 * rng.uniform();

    CMat sig(n + 1);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) sig(i, j) = s(i, j) + u[i] * std::conj(u[j]);
        sig(i, n) = u[i];
        sig(n, i) = std::conj(u[i]);
    }
    sig(n, n) = 1.0;
    MomentAmbiguitySet amb{sig, phi_bar, zeta};
    amb.validate();
    return amb;
}

}  // namespace

TEST_CASE("worst case matches the tight one-sided moment bound") {
    // Independent oracle: for scalar z with mean 0 and E|z|^2 = 1, search
    // two-point distributions (|z|^2 = t with probability q, else 0, with
    // q t = 1) for the largest P(|z|^2 >= 2).
    double oracle = 0.0;
    for (double t = 2.0; t <= 60.0; t += 1e-3) oracle = std::max(oracle, 1.0 / t);
    REQUIRE(oracle == Catch::Approx(0.5).margin(1e-9));

    const double b = worst_case_violation({1.0}, markov_unit_set(2.0));
    CHECK(b == Catch::Approx(0.5).margin(5e-4));
}

TEST_CASE("zero power never violates") {
    const double b = worst_case_violation({0.0}, markov_unit_set(2.0));
    CHECK(b == Catch::Approx(0.0).margin(1e-6));

    CHECK_THROWS_AS(worst_case_violation({-0.1}, markov_unit_set(2.0)), error);
    CHECK_THROWS_AS(worst_case_violation({1.0, 1.0}, markov_unit_set(2.0)), error);
}

TEST_CASE("worst case is invariant to per-entry phase rotation") {
    // |z_n| statistics do not change when z_n picks up a deterministic phase,
    // and neither may the bound; this cross-checks the real-embedding path.
    Rng rng(17);
    for (int rep = 0; rep < 10; ++rep) {
        const int n = 2;
        const MomentAmbiguitySet amb = random_amb(rng, n, true, 2.0);
        RVec c(n);
        for (double& v : c) v = 0.3 + rng.uniform();

        CMat rot(n + 1);
        for (int i = 0; i < n; ++i) {
            const double ph = 2.0 * 3.14159265358979 * rng.uniform();
            rot(i, i) = cxd(std::cos(ph), std::sin(ph));
        }
        rot(n, n) = 1.0;
        CMat sig2(n + 1);
        for (int i = 0; i <= n; ++i)
            for (int j = 0; j <= n; ++j) {
                cxd acc(0.0, 0.0);
                for (int a = 0; a <= n; ++a)
                    for (int b = 0; b <= n; ++b)
                        acc += rot(i, a) * amb.sigma(a, b) * std::conj(rot(j, b));
                sig2(i, j) = acc;
            }
        MomentAmbiguitySet amb2{sig2, amb.phi_bar, amb.zeta};

        const double b1 = worst_case_violation(c, amb);
        const double b2 = worst_case_violation(c, amb2);
        CHECK(b1 == Catch::Approx(b2).margin(1e-5));
    }
}

TEST_CASE("worst case is monotone and bounded") {
    Rng rng(5);
    for (int rep = 0; rep < 60; ++rep) {
        const int n = 1 + static_cast<int>(rng.uniform() * 3.0);
        const bool cplx = rep % 3 == 0;
        const MomentAmbiguitySet amb = random_amb(rng, n, cplx, 0.5 + 2.0 * rng.uniform());
        RVec c(n);
        for (double& v : c) v = rng.uniform();
        const double t = 1.0 + 2.0 * rng.uniform();
        RVec ct = c;
        for (double& v : ct) v *= t;

        const double b1 = worst_case_violation(c, amb);
        const double b2 = worst_case_violation(ct, amb);
        CHECK(b1 >= 0.0);
        CHECK(b1 <= 1.0);
        CHECK(b2 >= b1 - 1e-5);
    }
}

TEST_CASE("worst case scales with the threshold") {
    Rng rng(23);
    for (int rep = 0; rep < 25; ++rep) {
        const int n = 1 + rep % 2;
        const MomentAmbiguitySet amb = random_amb(rng, n, rep % 2 == 1, 1.0 + rng.uniform());
        RVec c(n);
        for (double& v : c) v = 0.2 + rng.uniform();
        const double t = 0.5 + 2.0 * rng.uniform();

        MomentAmbiguitySet scaled = amb;
        scaled.phi_bar = amb.phi_bar * t * t;
        RVec ct = c;
        for (double& v : ct) v *= t;

        const double b1 = worst_case_violation(c, amb);
        const double b2 = worst_case_violation(ct, scaled);
        CHECK(b1 == Catch::Approx(b2).margin(1e-5));
    }
}

TEST_CASE("fragment structure for a single relay") {
    ConicProblem cp;
    std::vector<LinExpr> powers(1);
    powers[0].constant = 1.0;
    const ChanceFragment fr = add_chance_blocks(cp, powers, markov_unit_set(2.0, 0.5));
    CHECK(fr.active);
    CHECK(fr.m_dim == 2);
    CHECK_FALSE(fr.embedded);
    CHECK(fr.nu.valid());
    CHECK(fr.m_block >= 0);
    CHECK(fr.t_block >= 0);
    CHECK(fr.t_block != fr.m_block);
    CHECK(fr.modeling_constraints() == 2);
    // ties for the 2x2 lower triangle plus the trace bound
    CHECK(fr.rows_added == 4);
}

TEST_CASE("fragment verdict flips at the worst-case probability") {
    // Worst case for the unit Markov instance is exactly 0.5; admitting that
    // probability keeps the blocks feasible, admitting less cannot.
    std::vector<LinExpr> powers(1);
    powers[0].constant = 1.0;

    ConicProblem feas;
    add_chance_blocks(feas, powers, markov_unit_set(2.0, 0.5));
    const Solution sf = feas.solve();
    CHECK(sf.usable());

    ConicProblem infeas;
    add_chance_blocks(infeas, powers, markov_unit_set(2.0, 0.49));
    const Solution si = infeas.solve();
    CHECK(si.status == SolveStatus::primal_infeasible);
}

TEST_CASE("fragment verdict agrees with the standalone bound") {
    Rng rng(31);
    int checked = 0;
    for (int rep = 0; rep < 40 && checked < 20; ++rep) {
        const int n = 2;
        MomentAmbiguitySet amb = random_amb(rng, n, rep % 2 == 0, 1.0 + rng.uniform());
        RVec c(n);
        for (double& v : c) v = 0.2 + 0.8 * rng.uniform();
        const double b = worst_case_violation(c, amb);
        if (b < 0.07 || b > 0.92) continue;
        ++checked;

        std::vector<LinExpr> powers(n);
        for (int i = 0; i < n; ++i) powers[i].constant = c[i] * c[i];

        amb.zeta = std::min(1.0, b + 0.05);
        ConicProblem feas;
        add_chance_blocks(feas, powers, amb);
        CHECK(feas.solve().usable());

        amb.zeta = b - 0.05;
        ConicProblem infeas;
        add_chance_blocks(infeas, powers, amb);
        CHECK(infeas.solve().status == SolveStatus::primal_infeasible);
    }
    CHECK(checked >= 10);
}

TEST_CASE("admitting certain violation disables the blocks") {
    ConicProblem cp;
    std::vector<LinExpr> powers(1);
    powers[0].constant = 1e9;
    const int rows0 = cp.num_rows();
    const ChanceFragment fr = add_chance_blocks(cp, powers, markov_unit_set(2.0, 1.0));
    CHECK_FALSE(fr.active);
    CHECK(fr.modeling_constraints() == 0);
    CHECK(cp.num_rows() == rows0);
    CHECK(cp.solve().usable());
}

TEST_CASE("empirical violation basics") {
    Rng rng(41);
    GaussianMomentSampler sampler(CVec(1, cxd(0.0, 0.0)), CMat::identity(1), rng);

    const ViolationEstimate zero = empirical_violation({0.0}, sampler, 2.0, 100);
    CHECK(zero.probability == 0.0);

    // |z|^2 is Exp(1) here, so P(|z|^2 >= 2) = exp(-2); checks the sampler
    // itself against an analytic law.
    const int trials = 100000;
    const ViolationEstimate est = empirical_violation({1.0}, sampler, 2.0, trials);
    CHECK(est.std_error > 0.0);
    CHECK(est.probability ==
          Catch::Approx(std::exp(-2.0)).margin(4.0 * std::sqrt(0.14 * 0.86 / trials)));

    // and the analytic worst case from the same moments dominates it
    CHECK(est.probability <= 0.5 + 3.0 * est.std_error);

    CHECK_THROWS_AS(empirical_violation({1.0}, sampler, 2.0, 0), error);
    CHECK_THROWS_AS(empirical_violation({-1.0}, sampler, 2.0, 10), error);
    CHECK_THROWS_AS(empirical_violation({1.0, 1.0}, sampler, 2.0, 10), error);
}

TEST_CASE("no matching distribution beats the worst case") {
    Rng rng(53);
    int failures = 0;
    for (int rep = 0; rep < 500; ++rep) {
        const int n = 1 + rep % 2;
        const bool cplx = rep % 3 == 0;
        const MomentAmbiguitySet amb = random_amb(rng, n, cplx, 0.8 + 1.5 * rng.uniform());
        RVec c(n);
        for (double& v : c) v = 0.3 + rng.uniform();
        const double worst = worst_case_violation(c, amb);

        CVec u(n);
        for (int i = 0; i < n; ++i) u[i] = amb.sigma(i, n);
        CMat s(n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                s(i, j) = amb.sigma(i, j) - u[i] * std::conj(u[j]);
        GaussianMomentSampler sampler(u, s, rng);

        RVec p(n);
        for (int i = 0; i < n; ++i) p[i] = c[i] * c[i];
        const ViolationEstimate est = empirical_violation(p, sampler, amb.phi_bar, 2000);
        if (est.probability > worst + 3.0 * std::max(est.std_error, 1e-3)) ++failures;
    }
    CHECK(failures == 0);
}

TEST_CASE("violation estimates are monotone under common randomness") {
    Rng rng(67);
    const int n = 2;
    const MomentAmbiguitySet amb = random_amb(rng, n, true, 1.5);
    CVec u(n);
    for (int i = 0; i < n; ++i) u[i] = amb.sigma(i, n);
    CMat s(n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) s(i, j) = amb.sigma(i, j) - u[i] * std::conj(u[j]);

    std::vector<CVec> draws;
    {
        GaussianMomentSampler sampler(u, s, rng);
        for (int t = 0; t < 2000; ++t) draws.push_back(sampler());
    }
    auto replay = [&draws, k = 0]() mutable { return draws[k++]; };
    auto replay2 = [&draws, k = 0]() mutable { return draws[k++]; };

    const RVec p{0.4, 0.7};
    RVec p2 = p;
    for (double& v : p2) v *= 2.0;
    const ViolationEstimate e1 = empirical_violation(p, replay, amb.phi_bar, 2000);
    const ViolationEstimate e2 = empirical_violation(p2, replay2, amb.phi_bar, 2000);
    CHECK(e2.probability >= e1.probability);
}
