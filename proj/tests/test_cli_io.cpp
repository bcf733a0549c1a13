#include <doctest.h>

#include <fstream>
#include <json.hpp>
#include <sstream>

#include "oracles.hpp"
#include "spillover/cli_io.hpp"
#include "spillover/errors.hpp"
#include "spillover/simulation.hpp"

using namespace spillover;

namespace {

struct Run {
    int code = 0;
    std::string out;
    std::string err;
};

Run cli(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    Run r;
    r.code = run_command(args, out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

std::vector<std::string> lines_of(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream is(s);
    std::string line;
    while (std::getline(is, line)) out.push_back(line);
    return out;
}

std::size_t data_rows(const std::string& s) {
    std::size_t n = 0;
    for (const auto& l : lines_of(s)) n += !l.empty() && l[0] != '#';
    return n > 0 ? n - 1 : 0;  // minus the column header
}

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("reading the wide schema") {
    std::istringstream two("# comment\ngroup_id,y0,y1,d0,d1,z0_1,z1_1\n1,0.5,1.5,0,1,0.1,-0.2\n\n2,2,3,+1,0,1e-3,4\n");
    const Dataset d = read_dataset_csv(two, "two.csv");
    REQUIRE(d.size() == 2);
    CHECK(d.groups[1].d[0] == 1);
    CHECK(d.groups[1].w[0][0] == 1e-3);
    CHECK(d.layout.z_dim == 1);

    std::istringstream missing("group_id,y0,y1,d0,z0_1,z1_1\n1,0,0,0,0,0\n");
    CHECK_THROWS_WITH_AS(read_dataset_csv(missing, "m.csv"), doctest::Contains("d1"), DataError);

    std::istringstream bad("group_id,y0,y1,d0,d1,z0_1,z1_1\n1,0,0,0,1,0,0\n2,0,0,yes,1,0,0\n");
    try {
        read_dataset_csv(bad, "bad.csv");
        FAIL("expected a parse error");
    } catch (const DataError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("bad.csv:3") != std::string::npos);
        CHECK(msg.find("d0") != std::string::npos);
        CHECK(msg.find("yes") != std::string::npos);
    }

    std::istringstream two_valued("group_id,y0,y1,d0,d1,z0_1,z1_1\n1,0,0,2,1,0,0\n");
    CHECK_THROWS_AS(read_dataset_csv(two_valued), DataError);
    CHECK_THROWS_AS(load_dataset_csv(oracle::temp_path("does-not-exist.csv")), DataError);
}

TEST_CASE("dataset round trip is exact") {
    DgpConfig cfg;
    cfg.G = 300;
    cfg.seed = 17;
    Dataset data = simulate_dataset(cfg);
    // Add a covariate column so the x block is exercised.
    for (auto& g : data.groups) {
        g.x_dim = 1;
        g.w[0].push_back(g.y[0] / 3.0);
        g.w[1].push_back(-g.y[1] / 7.0);
    }
    data = validate_dataset(data);
    std::ostringstream os;
    write_dataset_csv(os, data, {"note one"});
    CHECK(os.str().rfind("# note one\n", 0) == 0);
    std::istringstream is(os.str());
    const Dataset back = read_dataset_csv(is);
    REQUIRE(back.size() == data.size());
    CHECK(back.layout.x_dim == 1);
    for (std::size_t g = 0; g < data.size(); ++g) {
        CHECK(back.groups[g].group_id == data.groups[g].group_id);
        CHECK(back.groups[g].y == data.groups[g].y);
        CHECK(back.groups[g].d == data.groups[g].d);
        CHECK(back.groups[g].w == data.groups[g].w);
    }
    for (double x : {0.1, 1.0 / 3.0, -2.5e-300, 1e300, 123456789.125}) {
        CHECK(std::stod(format_double(x)) == x);
    }
}

TEST_CASE("grid parsing") {
    CHECK(parse_grid("0.5") == std::vector<double>{0.5});
    const auto g = parse_grid("0.3:0.7:5");
    REQUIRE(g.size() == 5);
    CHECK(g[1] == 0.4);
    CHECK(g[2] == 0.5);
    CHECK(g[4] == 0.7);
    CHECK_THROWS_AS(parse_grid("0.3:0.7"), ConfigError);
    CHECK_THROWS_AS(parse_grid("a:b:c"), ConfigError);
    const auto t = tensor_grid({0.1, 0.2}, {0.5, 0.6, 0.7});
    REQUIRE(t.size() == 6);
    CHECK(t[1] == Point2{0.1, 0.6});
    CHECK(t[3] == Point2{0.2, 0.5});
}

TEST_CASE("exit codes") {
    CHECK(exit_code_for(ConfigError("x")) == 2);
    CHECK(exit_code_for(DataError("x")) == 3);
    CHECK(exit_code_for(NumericalError("x")) == 4);
    CHECK(exit_code_for(std::runtime_error("x")) == 1);

    const Run unknown = cli({"frobnicate"});
    CHECK(unknown.code == 2);
    CHECK(unknown.err.find("unknown subcommand 'frobnicate'") != std::string::npos);
    const auto rec = nlohmann::json::parse(lines_of(unknown.err).at(0));
    CHECK(rec["status"] == "error");
    CHECK(rec["exit_code"] == 2);

    const Run missing = cli({"estimate-parametric", "--in", oracle::temp_path("nope.csv")});
    CHECK(missing.code == 3);
    CHECK(nlohmann::json::parse(lines_of(missing.err).at(0))["kind"] == "data");

    CHECK(cli({"simulate", "--g", "10"}).code == 2);  // --seed is required
}

TEST_CASE("simulate and estimate through the command line") {
    const std::string path = oracle::temp_path("cli_sim.csv");
    const Run sim = cli({"simulate", "--g", "1000", "--seed", "7", "--out", path});
    REQUIRE(sim.code == 0);
    const std::string body = read_file(path);
    const auto lines = lines_of(body);
    REQUIRE(lines.size() > 3);
    CHECK(lines[0] == "# spillover simulate");
    CHECK(lines[1].rfind("# config: ", 0) == 0);
    CHECK(lines[2] == "# seed: 7");
    const auto config = nlohmann::json::parse(lines[1].substr(10));
    CHECK(config["g"] == 1000);
    CHECK(data_rows(body) == 1000);

    // The file is the in-memory dataset, value for value.
    DgpConfig cfg;
    cfg.G = 1000;
    cfg.seed = 7;
    const Dataset mem = simulate_dataset(cfg);
    const Dataset disk = load_dataset_csv(path);
    for (std::size_t g = 0; g < mem.size(); ++g) CHECK(disk.groups[g].y == mem.groups[g].y);

    const std::string surf = oracle::temp_path("cli_surf.csv");
    const Run est = cli({"estimate-parametric", "--in", path, "--k1", "1", "--grid", "0.3:0.7:5", "--out", surf});
    REQUIRE(est.code == 0);
    const std::string s = read_file(surf);
    CHECK(s.rfind("# spillover estimate-parametric", 0) == 0);
    CHECK(data_rows(s) == 25);
    CHECK(s.find("p_own,p_peer,") != std::string::npos);
}

TEST_CASE("config files are overridden by flags") {
    const std::string cfg_path = oracle::temp_path("cli_config.json");
    {
        std::ofstream f(cfg_path);
        f << R"({"simulate": {"g": 40, "seed": 3, "rho": 0.1}})";
    }
    const Run from_file = cli({"simulate", "--config", cfg_path});
    REQUIRE(from_file.code == 0);
    CHECK(data_rows(from_file.out) == 40);
    const Run flagged = cli({"simulate", "--config", cfg_path, "--g", "15"});
    REQUIRE(flagged.code == 0);
    CHECK(data_rows(flagged.out) == 15);
    const auto resolved = nlohmann::json::parse(lines_of(flagged.out).at(1).substr(10));
    CHECK(resolved["g"] == 15);
    CHECK(resolved["rho"] == 0.1);
    CHECK(resolved["seed"] == 3);

    {
        std::ofstream f(cfg_path);
        f << R"({"simulate": {"gg": 40}})";
    }
    CHECK(cli({"simulate", "--config", cfg_path, "--seed", "1"}).code == 2);
}
