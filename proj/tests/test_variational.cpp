#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "helpers.hpp"
#include "nvpoly/variational.hpp"

using namespace nvpoly;

namespace {

const PhysicalProfile& physical_k1() {
    static const PhysicalProfile phys =
        scale_to_physical(integrate_scaled(-1.0, 1.0, SolverConfig{}), 1.0);
    return phys;
}

} // namespace

TEST_CASE("reduced field minimizes the field functional", "[variational]") {
    PhaseSpaceState st = make_polytrope_state(physical_k1(), 128, 96);
    auto psi = reduced_field(st);
    const double at_min = probe_energy(st, psi);

    // quadratic gap J_f(phi) - J_f(psi_f) >= 1/2 ||grad(phi - psi_f)||^2
    auto wr = simpson_weights(st.r_grid);
    auto gap_rhs = [&](const std::vector<double>& phi) {
        std::vector<double> diff(phi.size());
        for (std::size_t i = 0; i < phi.size(); ++i) diff[i] = phi[i] - psi[i];
        auto d = gradient(st.r_grid, diff);
        double g2 = 0.0;
        for (std::size_t i = 0; i < phi.size(); ++i)
            g2 += wr[i] * 4.0 * pi * st.r_grid[i] * st.r_grid[i] * d[i] * d[i];
        return 0.5 * g2;
    };

    std::vector<std::vector<double>> probes;
    probes.push_back(std::vector<double>(st.nr(), 0.0));
    std::vector<double> scaled(psi), deep(psi), gauss(st.nr());
    for (auto& v : scaled) v *= 0.7;
    for (auto& v : deep) v *= 1.4;
    for (std::size_t i = 0; i < st.nr(); ++i)
        gauss[i] = -0.5 * std::exp(-0.1 * st.r_grid[i] * st.r_grid[i] /
                                   (physical_k1().support_radius *
                                    physical_k1().support_radius));
    probes.push_back(scaled);
    probes.push_back(deep);
    probes.push_back(gauss);
    for (const auto& phi : probes) {
        const double lhs = probe_energy(st, phi) - at_min;
        const double rhs = gap_rhs(phi);
        CHECK(lhs >= rhs * (1.0 - 5e-3) - 1e-8 * std::abs(at_min));
        CHECK(lhs >= -1e-8 * std::abs(at_min)); // psi_f is the minimizer
    }

    // zero distribution: zero reduced field
    PhaseSpaceState z = st;
    z.f.assign(z.f.size(), 0.0);
    for (double v : reduced_field(z)) CHECK(v == 0.0);
}

TEST_CASE("renormalize projects onto the constraint pair", "[variational]") {
    const double q = 2.0;
    auto st = testutil::random_bump_state(7, 48, 48);
    auto rep = compute_functionals(st, q);

    // already feasible input is returned untouched
    PhaseSpaceState same = st;
    renormalize(same, rep.mass, rep.lq_norm, q);
    for (std::size_t m = 0; m < st.f.size(); ++m) CHECK(same.f[m] == st.f[m]);

    // doubled mass with the right L^q shape: both constraints restored
    PhaseSpaceState off = st;
    for (auto& v : off.f) v *= 2.0;
    renormalize(off, rep.mass, rep.lq_norm, q);
    auto fixed = compute_functionals(off, q);
    CHECK(fixed.mass == Catch::Approx(rep.mass).epsilon(1e-9));
    CHECK(fixed.lq_norm == Catch::Approx(rep.lq_norm).epsilon(1e-9));

    // a genuinely different target pair
    PhaseSpaceState other = st;
    renormalize(other, 0.8 * rep.mass, 1.1 * rep.lq_norm, q);
    auto moved = compute_functionals(other, q);
    CHECK(moved.mass == Catch::Approx(0.8 * rep.mass).epsilon(1e-9));
    CHECK(moved.lq_norm == Catch::Approx(1.1 * rep.lq_norm).epsilon(1e-9));

    PhaseSpaceState zero = st;
    zero.f.assign(zero.f.size(), 0.0);
    CHECK_THROWS_AS(renormalize(zero, 1.0, 1.0, q), std::invalid_argument);
}

TEST_CASE("exact dilation preserves mass and moves only the L^q norm",
          "[variational]") {
    const double q = 1.0 + 1.0 / 1.0;
    auto st = testutil::random_bump_state(13, 40, 40);
    auto base = compute_functionals(st, q);
    const double alpha = 1.37;
    PhaseSpaceState d = dilate_rescale(st, alpha);
    auto rep = compute_functionals(d, q);
    CHECK(rep.mass == Catch::Approx(base.mass).epsilon(1e-13));
    CHECK(rep.lq_norm ==
          Catch::Approx(std::pow(alpha, 3.0 * (q - 1.0) / q) * base.lq_norm)
              .epsilon(1e-13));
}

TEST_CASE("mass transport scales the energy exactly", "[variational]") {
    // randomized feasible states, identity E(f~, phi~) = (M2/M1) E(f, phi)
    for (unsigned seed : {2u, 23u, 101u, 404u}) {
        auto st = testutil::random_bump_state(seed, 40, 40);
        for (std::size_t i = 0; i < st.nr(); ++i)
            st.phi[i] = -0.3 * std::exp(-st.r_grid[i] / 2.0);
        auto r1 = compute_functionals(st, 2.0);
        const double E1 = r1.e_kin + r1.e_field;
        const double M2 = (seed % 2 ? 2.7 : 0.41) * r1.mass;
        PhaseSpaceState tr = scaling_transport(st, M2);
        auto r2 = compute_functionals(tr, 2.0);
        const double E2 = r2.e_kin + r2.e_field;
        CHECK(r2.mass == Catch::Approx(M2).epsilon(1e-12));
        CHECK(E2 == Catch::Approx((M2 / r1.mass) * E1).epsilon(1e-10));
        // L^q scaling exponent (2-k)/(1+k) at q = 1+1/k, k = 1
        CHECK(r2.lq_norm ==
              Catch::Approx(std::pow(r1.mass / M2, 0.5) * r1.lq_norm).epsilon(1e-10));
    }

    auto st = testutil::random_bump_state(5, 24, 24);
    auto r1 = compute_functionals(st, 2.0);
    PhaseSpaceState id = scaling_transport(st, r1.mass);
    for (std::size_t i = 0; i < st.nr(); ++i)
        CHECK(id.r_grid[i] == Catch::Approx(st.r_grid[i]).epsilon(1e-14));
    CHECK_THROWS_AS(scaling_transport(st, -1.0), std::invalid_argument);
}

TEST_CASE("explicit test family and its energy bound", "[variational]") {
    const double M = 10.0, J = 3.0, k = 1.0;

    // the construction carries mass M and L^{1+1/k} norm J exactly
    for (double gamma : {0.02, 0.1, 0.5})
        for (double alpha : {0.0, 0.5, 2.0}) {
            auto tf = test_family_energy(gamma, alpha, M, J, k);
            CHECK(tf.mass == Catch::Approx(M).epsilon(1e-12));
            CHECK(tf.lq_norm == Catch::Approx(J).epsilon(1e-12));
            CHECK(tf.energy <= tf.bound * (1.0 + 1e-12));
        }

    // alpha = 0, gamma -> 0: the energy approaches M from above
    for (double gamma : {0.1, 0.01, 0.001}) {
        auto tf = test_family_energy(gamma, 0.0, M, J, k);
        CHECK(tf.energy >= M);
        CHECK(tf.energy - M <= 0.75 * M * gamma);
    }

    // large mass: the optimized family dips strictly below the mass
    for (double k2 : {0.5, 1.0, 1.5}) {
        const double big = 10.0 * test_family_mass_threshold(J, k2);
        auto of = optimized_test_family(big, J, k2);
        CHECK(of.A > 1.0);
        CHECK(big > of.mass_threshold);
        CHECK(of.family.energy < big);
        // and below the closed-form cap A^{-1}(1 + ln A) M
        CHECK(of.family.energy <= (1.0 + std::log(of.A)) / of.A * big);
    }
    // below the threshold the construction refuses
    CHECK_THROWS_AS(optimized_test_family(1e2, J, 1.0), std::invalid_argument);
}

TEST_CASE("descent initialized at the polytrope stays put", "[variational]") {
    const PhysicalProfile& phys = physical_k1();
    MinimizeConfig mc;
    mc.init = make_polytrope_state(phys, 64, 64);
    mc.max_iters = 120;
    auto res = minimize_energy(phys.mass, phys.lq_norm, 1.0, mc);
    const double start = res.trace.front().energy;
    CHECK((start - res.energy) / start < 1e-5); // already the minimizer
    CHECK(res.kkt_residual < 1e-2);
    CHECK_FALSE(res.below_mass_threshold);
    // energy is non-increasing along the trace
    for (std::size_t i = 1; i < res.trace.size(); ++i)
        CHECK(res.trace[i].energy <= res.trace[i - 1].energy + 1e-12);
}

TEST_CASE("descent from a uniform box finds the polytrope", "[variational]") {
    const PhysicalProfile& phys = physical_k1();
    MinimizeConfig mc;
    mc.nr = 48;
    mc.np = 48;
    mc.r_max = 1.35 * phys.support_radius;
    const double mc0 = std::exp(phys.phi_at(0.0));
    mc.p_max = 1.25 * std::sqrt((phys.params.e0 - mc0) * (phys.params.e0 + mc0));
    mc.max_iters = 250;
    auto res = minimize_energy(phys.mass, phys.lq_norm, 1.0, mc);

    CHECK(std::abs(res.energy - phys.i_estimate) / phys.i_estimate < 1e-2);
    CHECK(res.kkt_residual < 1e-2);
    CHECK(res.mass == Catch::Approx(phys.mass).epsilon(1e-8));
    CHECK(res.lq_norm == Catch::Approx(phys.lq_norm).epsilon(1e-8));
    CHECK(res.energy < phys.mass); // strict inequality of the large-mass regime
    CHECK(res.energy > 0.0);       // the infimum is strictly positive
    for (const auto& row : res.trace) CHECK(row.energy > 0.0);

    // level sets of f align with level sets of E: rank correlation
    std::vector<double> fs, neg_e;
    for (std::size_t i = 0; i < res.state.nr(); ++i) {
        const double m2 = std::exp(2.0 * res.state.phi[i]);
        for (std::size_t j = 0; j < res.state.np(); ++j) {
            const double f = res.state.at(i, j);
            if (f > 1e-8) {
                fs.push_back(f);
                neg_e.push_back(-std::sqrt(m2 + res.state.p_grid[j] * res.state.p_grid[j]));
            }
        }
    }
    CHECK(testutil::spearman(fs, neg_e) > 0.999);

    // fitted multipliers agree with the shooting pipeline's
    CHECK(res.kkt_e0 == Catch::Approx(phys.params.e0).epsilon(5e-2));
    CHECK(res.kkt_c == Catch::Approx(phys.params.c).epsilon(5e-2));

    // off the support the particle energy clears the fitted cutoff
    double worst = 1e300;
    for (std::size_t i = 0; i < res.state.nr(); ++i) {
        const double m2 = std::exp(2.0 * res.state.phi[i]);
        for (std::size_t j = 0; j < res.state.np(); ++j) {
            if (res.state.at(i, j) > 1e-10) continue;
            const double E =
                std::sqrt(m2 + res.state.p_grid[j] * res.state.p_grid[j]);
            worst = std::min(worst, E - res.kkt_e0);
        }
    }
    CHECK(worst > -1e-2);
}

TEST_CASE("sub-threshold masses terminate with the stuck-at-M report",
          "[variational]") {
    // V = M^2/J^2 forces spread beyond the grid, so the vanishing sequence
    // cannot push the energy below M here
    MinimizeConfig mc;
    mc.r_max = 3.0;
    mc.p_max = 1.0;
    mc.max_iters = 60;
    auto res = minimize_energy(0.5, 0.2, 1.0, mc);
    CHECK(res.below_mass_threshold);
    CHECK(res.energy >= 0.5);
}

TEST_CASE("minimizer rejects bad arguments", "[variational]") {
    MinimizeConfig mc;
    CHECK_THROWS_AS(minimize_energy(1.0, 1.0, 2.7, mc), std::invalid_argument);
}
