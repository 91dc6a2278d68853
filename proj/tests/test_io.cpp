#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "helpers.hpp"
#include "nvpoly/config.hpp"
#include "nvpoly/io.hpp"

using namespace nvpoly;

TEST_CASE("g17 formatting round-trips doubles", "[io]") {
    for (double v : {1.0 / 3.0, 6.6336574652, -1e-17, 3.141592653589793, 1e300}) {
        CHECK(std::stod(format_g17(v)) == v);
    }
}

TEST_CASE("state JSON schema round-trips exactly", "[io]") {
    auto st = testutil::random_bump_state(19, 12, 9);
    for (std::size_t i = 0; i < st.nr(); ++i) st.phi[i] = -0.1 * double(i);
    nlohmann::json j = state_to_json(st);
    CHECK(j.at("f").size() == st.nr());
    CHECK(j.at("f").at(0).size() == st.np());
    PhaseSpaceState back = state_from_json(j);
    CHECK(back.r_grid == st.r_grid);
    CHECK(back.p_grid == st.p_grid);
    CHECK(back.f == st.f);
    CHECK(back.phi == st.phi);
    CHECK(back.phi_t == st.phi_t);

    nlohmann::json bad = j;
    bad["f"].erase(0);
    CHECK_THROWS_AS(state_from_json(bad), std::invalid_argument);
}

TEST_CASE("config hash is stable and content-sensitive", "[io]") {
    nlohmann::json a = {{"k", 1.0}, {"ode", {{"rel_tol", 1e-10}}}};
    nlohmann::json b = a;
    CHECK(config_hash(a) == config_hash(b));
    b["ode"]["rel_tol"] = 1e-12;
    CHECK(config_hash(a) != config_hash(b));
    CHECK(hash_string(config_hash(a)).size() == 16);
}

TEST_CASE("run config: dotted paths, file and environment loading", "[io]") {
    RunConfig empty;
    CHECK(empty.value("ode.rel_tol", 1e-10) == 1e-10);
    SolverConfig s = empty.solver();
    CHECK(s.epsilon == 1e-5);

    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "nvpoly_io_test";
    fs::create_directories(dir);
    const fs::path cfg = dir / "cfg.json";
    {
        std::ofstream out(cfg);
        out << R"({"ode": {"epsilon": 2e-5, "rel_tol": 1e-9}, "polytrope": {"k": 0.5}})";
    }
    RunConfig loaded = RunConfig::load(cfg.string());
    CHECK(loaded.value("ode.epsilon", 0.0) == 2e-5);
    CHECK(loaded.value("polytrope.k", 1.0) == 0.5);
    CHECK(loaded.value("ode.abs_tol", 7.0) == 7.0); // untouched key falls back
    CHECK(loaded.solver().epsilon == 2e-5);
    CHECK(loaded.solver().rel_tol == 1e-9);

    setenv("NVPOLY_CONFIG", cfg.string().c_str(), 1);
    RunConfig via_env = RunConfig::load("");
    CHECK(via_env.value("ode.epsilon", 0.0) == 2e-5);
    unsetenv("NVPOLY_CONFIG");

    CHECK_THROWS_AS(RunConfig::load((dir / "missing.json").string()), std::runtime_error);
    {
        std::ofstream out(dir / "broken.json");
        out << "{ not json";
    }
    CHECK_THROWS_AS(RunConfig::load((dir / "broken.json").string()), std::runtime_error);
}

TEST_CASE("csv writer emits hash line, header and LF rows", "[io]") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "nvpoly_io_test";
    fs::create_directories(dir);
    const fs::path path = dir / "out.csv";
    {
        CsvWriter csv(path.string(), 0xabcdef0123456789ull, "x,y");
        csv.row(std::vector<double>{1.0 / 3.0, 2.0});
    }
    std::ifstream in(path, std::ios::binary);
    std::string all((std::istreambuf_iterator<char>(in)), {});
    CHECK(all == "# config=abcdef0123456789\nx,y\n0.33333333333333331,2\n");
}

TEST_CASE("functional report serializes flat", "[io]") {
    FunctionalReport r;
    r.mass = 2.0;
    r.hamiltonian = 3.5;
    nlohmann::json j = report_to_json(r);
    CHECK(j["mass"] == 2.0);
    CHECK(j["hamiltonian"] == 3.5);
    CHECK(j.contains("virial_lhs"));
    CHECK(j.contains("conformal_truncated"));
}
