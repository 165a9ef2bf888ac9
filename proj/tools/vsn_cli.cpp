#include <cstdio>
#include <iostream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "vsn/error.hpp"
#include "vsn/pipeline.hpp"
#include "vsn/synth.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Narrative macrostructure analysis pipeline"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config;
    int system = 8;
    std::uint64_t seed = 0;
    std::string out = "out";
    bool quiet = false;
    app.add_flag("-q,--quiet", quiet, "suppress warnings");

    const std::vector<std::pair<const char*, const char*>> commands = {
        {"extract", "compute feature families and the system's merged matrix"},
        {"train-dtm", "fit the dynamic topic model and emit trajectories"},
        {"train-titan", "train the text-image alignment network (system 8)"},
        {"train-svm", "grid-search and fit the PCA+SVM baseline (systems 1-7)"},
        {"eval", "score the trained system on the test split"},
        {"explain", "SHAP values and Spearman ranking (systems 1-7)"},
        {"plotdata", "plot-ready CSV matrices"},
    };
    for (const auto& [name, help] : commands) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("--config", config, "flat JSON config")->required()->check(CLI::ExistingFile);
        sub->add_option("--system", system, "system 1..8")->check(CLI::Range(1, 8));
        sub->add_option("--seed", seed, "random seed");
        sub->add_option("--out", out, "output directory");
    }
    std::string fixture_dir;
    std::uint64_t fixture_seed = 7;
    auto* gen = app.add_subcommand("gen-fixture", "write the synthetic English fixture corpus");
    gen->add_option("--out", fixture_dir, "target directory")->required();
    gen->add_option("--seed", fixture_seed, "generator seed");

    CLI11_PARSE(app, argc, argv);
    vsn::set_warnings_enabled(!quiet);
    try {
        auto* sub = app.get_subcommands().front();
        if (sub->get_name() == "gen-fixture") {
            std::cout << vsn::synth::write_fixture_corpus(fixture_dir, fixture_seed).string() << "\n";
            return 0;
        }
        const auto cfg = vsn::pipeline::RunConfig::load(config, system, seed, out);
        vsn::pipeline::run(sub->get_name(), cfg);
    } catch (const vsn::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
