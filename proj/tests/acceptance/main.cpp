#include "pdmp/acceptance.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"acceptance criteria"};
    pdmp::AcceptanceOptions opt;
    opt.out = "acceptance_out";
    app.add_option("--seed", opt.seed);
    app.add_option("--threads", opt.threads);
    app.add_option("--out", opt.out);
    app.add_option("--paths", opt.paths);
    app.add_option("--only", opt.only)->delimiter(',');
    CLI11_PARSE(app, argc, argv);
    const auto res = pdmp::run_acceptance(opt, std::cout);
    bool ok = true;
    for (const auto& r : res) ok = ok && r.pass;
    return ok ? 0 : 1;
}
