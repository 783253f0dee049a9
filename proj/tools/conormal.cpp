// conormal: command-line front end.
//
//   conormal chords    --scenario FILE [--seed N] [--out DIR] [--svg]
//   conormal morse     --scenario FILE [--seed N] [--out DIR]
//   conormal coproduct --scenario FILE [--seed N] [--out DIR]
//   conormal compare   --scenario FILE [--seed N] [--out DIR]
//   conormal validate  --scenario FILE [--seed N]
//   conormal repro hopf  [--out DIR] [--svg]
//   conormal repro k0k1  [--n 9] [--d 4] [--M T2] [--lch] [--seed N] [--out DIR]
//
// Exit codes: 0 success, 1 usage or configuration error, 2 hypothesis
// failure, 3 numerical failure.

#include <functional>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "conormal/cli.hpp"
#include "conormal/errors.hpp"

using namespace conormal;

namespace {

int emit(const cli::Report& r, const std::string& out) {
    if (out.empty())
        std::cout << r.json.dump(2) << '\n';
    else {
        r.write(out);
        std::cerr << r.verb << ": wrote " << out << "/report.json\n";
    }
    return r.exitCode;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Binormal chords, Morse complexes and the string coproduct of conormal tori"};
    app.require_subcommand(1);

    std::string scenarioPath, out;
    std::optional<unsigned> seed;
    bool svg = false;
    std::function<int()> action;

    using Runner = cli::Report (*)(const cli::Scenario&);
    const std::pair<const char*, Runner> verbs[] = {
        {"chords", cli::runChords},       {"morse", cli::runMorse},       {"coproduct", cli::runCoproduct},
        {"compare", cli::runCompare},     {"validate", cli::validate}};
    const char* help[] = {"find binormal chords, indices and degrees",
                          "build the Morse complex and compare with the Betti oracle",
                          "compute the coproduct matrix (route from the scenario)",
                          "compare the Morse and geometric routes on a link",
                          "check admissibility, condition star and route gates"};
    for (std::size_t i = 0; i < std::size(verbs); ++i) {
        auto* sub = app.add_subcommand(verbs[i].first, help[i]);
        sub->add_option("--scenario", scenarioPath, "scenario TOML file")->required()->check(CLI::ExistingFile);
        sub->add_option("--seed", seed, "perturbation seed (overrides the scenario)");
        sub->add_option("--out", out, "output directory (default: JSON to stdout)");
        sub->add_flag("--svg", svg, "also write SVG figures");
        const Runner run = verbs[i].second;
        sub->callback([&, run] {
            action = [&, run] {
                auto s = cli::Scenario::load(scenarioPath);
                if (seed) s.seed = s.perturbation.seed = *seed;
                if (svg) s.svg = true;
                if (!out.empty()) s.outDir = out;
                return emit(run(s), s.outDir);
            };
        });
    }

    auto* repro = app.add_subcommand("repro", "reproduce a reference computation");
    repro->require_subcommand(1);
    auto* hopf = repro->add_subcommand("hopf", "coproduct of the Hopf link by the geometric route");
    hopf->add_option("--out", out, "output directory");
    hopf->add_flag("--svg", svg, "also write the locus SVG");
    hopf->callback([&] {
        action = [&] { return emit(cli::reproHopf({svg}), out); };
    });

    cli::K0K1ReproOptions k01;
    auto* k0k1 = repro->add_subcommand("k0k1", "distinguish K0 and K1 by the coproduct");
    k0k1->add_option("--n", k01.n, "ambient dimension")->check(CLI::Range(4, 32));
    k0k1->add_option("--d", k01.d, "codimension")->check(CLI::Range(2, 16));
    k0k1->add_option("--M", k01.M, "normalized submanifold (T2)");
    k0k1->add_option("--q-grid", k01.qGrid, "samples per loop parameter")->check(CLI::Range(2, 64));
    k0k1->add_option("--seed", k01.seed, "sampling seed");
    k0k1->add_flag("--lch", k01.lch, "also compare low-degree Legendrian contact homology");
    k0k1->add_option("--out", out, "output directory");
    k0k1->callback([&] {
        action = [&] { return emit(cli::reproK0K1(k01), out); };
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }
    try {
        return action();
    } catch (const ConormalError& e) {
        std::cerr << "error [" << stageName(e.stage()) << "]: " << e.what() << '\n';
        return e.exitCode();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
}
