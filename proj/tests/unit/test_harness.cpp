#include "oracles.hpp"

#include "pdmp/cli.hpp"
#include "pdmp/config.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace pdmp;
namespace fs = std::filesystem;

namespace {

struct CliResult {
    int code;
    std::string out, err;
};

CliResult run(std::vector<std::string> args) {
    args.insert(args.begin(), "pdmp");
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    std::ostringstream out, err;
    const int code = cli_main(int(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("pdmp_test_" + name);
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::vector<std::string>> csv(const fs::path& p) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(slurp(p));
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::stringstream ls(line);
        std::string c;
        while (std::getline(ls, c, ',')) cells.push_back(c);
        rows.push_back(cells);
    }
    return rows;
}

} // namespace

TEST_CASE("config defaults") {
    const auto c = parse_config("[problem]\nname = B1\n");
    CHECK(c.horizon == 20);
    CHECK(c.grid.dx == 0.05);
    CHECK(c.n_schedule == std::vector<double>{1, 2, 4, 8, 16, 32});
}

TEST_CASE("config rejections") {
    auto message = [](const std::string& text) {
        try {
            parse_config(text);
        } catch (const Error& e) {
            return std::string(e.what());
        }
        return std::string();
    };
    CHECK(message("[problem]\nname = B1\ndiscount = 0\n").find("discount must be positive") != std::string::npos);
    CHECK(message("[problem]\nname = B1\nlambda0 = 1, 0\n").find("every action weight must be positive") !=
          std::string::npos);
    CHECK(message("[problem]\nname = B1\n[grid]\ndxx = 0.1\n").find("grid.dxx") != std::string::npos);
    CHECK(message("[grid]\ndx = 0.1\n").find("problem.name") != std::string::npos);
    CHECK(message("[problem]\nname = B1\n[mc]\npaths = many\n").find("mc.paths") != std::string::npos);
    CHECK(message("[problem]\nname = B1\n[bsde]\nbasis = wavelet\n").find("bsde.basis") != std::string::npos);
}

TEST_CASE("config round trip") {
    auto c = parse_config("[problem]\nname = B4\nx = 0.5\n[bsde]\nbasis = legendre\nridge = 0.001\n[dual]\neps = 0.3,0.1\n");
    std::ostringstream os;
    write_config(os, c);
    const auto back = parse_config(os.str());
    std::ostringstream os2;
    write_config(os2, back);
    CHECK(os.str() == os2.str());
    CHECK(back.picard.basis == BasisKind::legendre);
    CHECK(back.eps == std::vector<double>{0.3, 0.1});
}

TEST_CASE("compare on the constant-cost benchmark") {
    const auto dir = scratch("b1");
    const auto r = run({"compare", "--problem", "B1", "--seed", "7", "--paths", "2000", "--out", dir.string()});
    REQUIRE(r.code == 0);
    for (const auto& row : csv(dir / "compare.csv")) CHECK(std::abs(std::stod(row[4])) < 1e-10);
    CHECK(fs::exists(dir / "config.ini"));
    CHECK(fs::exists(dir / "compare_dual.csv"));
}

TEST_CASE("compare on the jump-only benchmark") {
    const auto dir = scratch("b2");
    fs::create_directories(dir);
    {
        std::ofstream cfg(dir / "run.ini");
        cfg << "[problem]\nname = B2\n[grid]\nn_schedule = 1,2,4,8,16,32,64,128,256,512,1024,2048\n";
    }
    const auto r = run({"compare", "--config", (dir / "run.ini").string(), "--seed", "7", "--paths", "2000", "--out",
                        dir.string()});
    REQUIRE(r.code == 0);
    const auto rows = csv(dir / "compare.csv");
    REQUIRE(rows.size() == 3);
    for (const auto& row : rows) {
        const double oracle = std::stod(row[5]);
        CHECK(std::abs(std::stod(row[1]) - oracle) < 5e-3);
        CHECK(std::abs(std::stod(row[2]) - oracle) < 5e-3);
        CHECK(std::abs(std::stod(row[3]) - oracle) < 5e-3);
    }
}

TEST_CASE("epsilon-shift command") {
    const auto dir = scratch("shift");
    fs::create_directories(dir);
    {
        std::ofstream cfg(dir / "run.ini");
        cfg << "[problem]\nname = B4\n[mc]\nflow_step = 0.05\npaths = 20000\n";
    }
    const auto r = run({"a-shift", "--config", (dir / "run.ini").string(), "--nu", "const1", "--eps",
                        "0.2,0.1,0.05,0.025", "--out", dir.string()});
    REQUIRE(r.code == 0);
    const auto rows = csv(dir / "a_shift.csv");
    REQUIRE(rows.size() == 6);
    const double target = std::stod(rows[5][2]), target_se = std::stod(rows[5][3]);
    // each halving of eps moves J(x, a', nu^eps) towards J(x, a, nu)
    for (std::size_t k = 1; k < 4; ++k) {
        CAPTURE(k);
        const double prev = std::abs(std::stod(rows[k - 1][2]) - target);
        const double gap = std::abs(std::stod(rows[k][2]) - target);
        CHECK(gap < prev);
    }
    const double rich = std::stod(rows[4][2]), rich_se = std::stod(rows[4][3]);
    CHECK(std::abs(rich - target) < 3 * std::hypot(rich_se, target_se));
}

TEST_CASE("bad input gives a nonzero exit with the key") {
    const auto dir = scratch("bad");
    fs::create_directories(dir);
    {
        std::ofstream cfg(dir / "run.ini");
        cfg << "[problem]\nname = B1\n[mc]\nthreds = 2\n";
    }
    auto r = run({"solve-hjb", "--config", (dir / "run.ini").string(), "--out", dir.string()});
    CHECK(r.code != 0);
    CHECK(r.err.find("mc.threds") != std::string::npos);
    r = run({"solve-hjb", "--problem", "B7", "--out", dir.string()});
    CHECK(r.code != 0);
    r = run({"frobnicate"});
    CHECK(r.code != 0);
}

TEST_CASE("identical seeds give identical files") {
    const auto a = scratch("det_a"), b = scratch("det_b"), c = scratch("det_c");
    for (const auto& [dir, threads] : {std::pair{a, "1"}, std::pair{b, "4"}, std::pair{c, "1"}}) {
        const auto r = run({"simulate", "--problem", "B4", "--seed", "3", "--paths", "300", "--threads", threads,
                            "--out", dir.string()});
        REQUIRE(r.code == 0);
    }
    CHECK(slurp(a / "paths.csv") == slurp(b / "paths.csv"));
    CHECK(slurp(a / "paths.csv") == slurp(c / "paths.csv"));
    const auto d = scratch("det_d");
    run({"simulate", "--problem", "B4", "--seed", "4", "--paths", "300", "--out", d.string()});
    CHECK(slurp(a / "paths.csv") != slurp(d / "paths.csv"));
}

TEST_CASE("solver commands write their tables") {
    const auto dir = scratch("solve");
    CHECK(run({"validate", "--problem", "B4", "--out", dir.string()}).code == 0);
    CHECK(run({"solve-hjb", "--problem", "B3", "--out", dir.string()}).code == 0);
    CHECK(fs::exists(dir / "hjb_value.csv"));
    CHECK(fs::exists(dir / "hjb_trace.json"));
    CHECK(run({"solve-bsde", "--problem", "B2", "--out", dir.string()}).code == 0);
    CHECK(fs::exists(dir / "limit_trace.json"));
    CHECK(run({"dual-eval", "--problem", "B2", "--nu", "zsign", "--paths", "1000", "--out", dir.string()}).code == 0);
    CHECK(fs::exists(dir / "dual.csv"));
}
