// acrlab command-line front end.
//
//   acrlab bench run|report     detection grid over the corpus + bias report
//   acrlab attack baseline|template|refine
//   acrlab defend run           debiasing escalation over successful attacks
//   acrlab report render        write all report files from the run store

#include <cstdio>
#include <iostream>
#include <memory>

#include <CLI11.hpp>

#include "acrlab/acrlab.hpp"
#include "acrlab/gateway_http.hpp"

namespace {

using namespace acrlab;

struct GlobalOptions {
    std::string config_path = "config.json";
    std::string store_override;
    std::string mock_script;
    std::string policy_override;
    bool live = false;
    bool interactive = false;
    bool allow_partial = false;
};

CampaignConfig load_effective_config(const GlobalOptions& opts) {
    CampaignConfig cfg = load_config(opts.config_path);
    if (!opts.store_override.empty()) cfg.store_dir = opts.store_override;
    if (!opts.policy_override.empty()) cfg.policy_path = opts.policy_override;
    cfg.live_allowed = opts.live;
    cfg.interactive = opts.interactive;
    return cfg;
}

std::unique_ptr<Gateway> make_gateway(const CampaignConfig& cfg, const GlobalOptions& opts) {
    auto gateway = std::make_unique<Gateway>(cfg.backend, cfg.store_dir / "ledger.jsonl");
    for (const auto& profile : cfg.profiles) gateway->register_profile(profile);
    if (cfg.backend == BackendKind::live)
        gateway->set_live_backend(std::make_unique<LiveBackend>(make_httplib_transport()));
    if (!opts.mock_script.empty()) load_mock_scripts(*gateway, opts.mock_script);
    return gateway;
}

char console_ask(const std::string& request) {
    std::printf("tool request: %s  [y]es / [n]o / [a]bort? ", request.c_str());
    std::fflush(stdout);
    std::string line;
    if (!std::getline(std::cin, line) || line.empty()) return 'n';
    return static_cast<char>(std::tolower(static_cast<unsigned char>(line[0])));
}

int run_bench(const CampaignConfig& cfg, Gateway& gateway, bool execute_grid) {
    RunStore store(cfg.store_dir);
    if (execute_grid) {
        if (cfg.corpus.root.empty() || cfg.bench.models.empty())
            fail(Errc::config_error, "bench run needs corpus.root and bench.models in the config");
        CorpusManifest manifest = load_manifest(cfg.corpus.root);
        manifest = filter_pairs(manifest, cfg.corpus.max_tokens);
        std::vector<FilePair> sample = manifest.pairs;
        if (!cfg.corpus.strata.empty())
            sample = stratified_sample(manifest, {cfg.corpus.strata, cfg.rng_seed});
        write_file(store.dir() / "manifest.json", manifest_to_json(manifest).dump(2) + "\n");
        write_file(store.dir() / "exclusions.csv", exclusions_to_csv(manifest));

        GridRunStats stats;
        run_grid(cfg.bench.models, cfg.bench.conditions, sample, gateway, store.dir(),
                 cfg.campaign_id, cfg.max_parallel, cfg.templates_dir, &stats);
        std::printf("grid complete: %zu cells (%zu new backend calls, %zu resumed)\n",
                    stats.total_cells, stats.new_backend_calls, stats.resumed_cells);
    }
    Campaign campaign(cfg, gateway);
    campaign.render_reports(true);
    std::printf("bias report written under %s\n", (store.dir() / "reports").string().c_str());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"framing-bias measurement and contextual-bias attack emulation for ACR pipelines"};
    app.require_subcommand(1);

    GlobalOptions opts;
    app.add_option("--config", opts.config_path, "configuration file (JSON)");
    app.add_option("--store", opts.store_override, "run store directory (overrides config)");
    app.add_option("--mock-script", opts.mock_script, "scripted responses for the mock backend");
    app.add_option("--policy", opts.policy_override, "tool policy file (overrides config)");
    app.add_flag("--live", opts.live, "allow live provider calls");
    app.add_flag("--interactive", opts.interactive, "adjudicate ask-rules on the console");

    CLI::App* bench = app.add_subcommand("bench", "framing-condition detection benchmark");
    bench->require_subcommand(1);
    CLI::App* bench_run = bench->add_subcommand("run", "execute the detection grid");
    CLI::App* bench_report = bench->add_subcommand("report", "re-render the bias report");

    CLI::App* attack = app.add_subcommand("attack", "vulnerability re-introduction attacks");
    attack->require_subcommand(1);
    CLI::App* attack_baseline = attack->add_subcommand("baseline", "unbiased baseline PRs");
    CLI::App* attack_template = attack->add_subcommand("template", "bias-template permutations");
    CLI::App* attack_refine = attack->add_subcommand("refine", "LLM-assisted iterative refinement");

    CLI::App* defend = app.add_subcommand("defend", "debiasing defenses");
    CLI::App* defend_run = defend->add_subcommand("run", "run D-1/D-2 escalation");
    defend->require_subcommand(1);

    CLI::App* report = app.add_subcommand("report", "report rendering");
    CLI::App* report_render = report->add_subcommand("render", "write all report files");
    report_render->add_flag("--allow-partial", opts.allow_partial,
                            "render even if the run is incomplete");
    report->require_subcommand(1);

    CLI11_PARSE(app, argc, argv);

    try {
        const CampaignConfig cfg = load_effective_config(opts);
        auto gateway = make_gateway(cfg, opts);

        if (bench_run->parsed()) return run_bench(cfg, *gateway, true);
        if (bench_report->parsed()) return run_bench(cfg, *gateway, false);

        Campaign campaign(cfg, *gateway);
        if (opts.interactive) campaign.ask_handler_ = console_ask;

        if (attack_baseline->parsed()) {
            const auto verdicts = campaign.run_baseline();
            long rejects = 0;
            for (const auto& [id, v] : verdicts)
                if (v == ReviewVerdict::reject) ++rejects;
            std::printf("baseline: %zu targets reviewed, %ld rejections\n", verdicts.size(),
                        rejects);
        } else if (attack_template->parsed()) {
            const auto matrix = campaign.run_template_campaign();
            std::size_t jobs = 0;
            for (const auto& [id, cells] : matrix) jobs += cells.size();
            const auto flips = flip_analysis(campaign.collect_verdicts("baseline"), matrix);
            std::printf("template campaign: %zu jobs, %zu reject->accept flips, %zu "
                        "accept->reject flips\n",
                        jobs, flips.reject_to_accept.size(), flips.accept_to_reject.size());
        } else if (attack_refine->parsed()) {
            const auto traces = campaign.run_refinement_campaign();
            long successes = 0;
            for (const auto& [id, trace] : traces)
                if (trace.status == TraceStatus::success) ++successes;
            std::printf("refinement: %ld/%zu attacks succeeded\n", successes, traces.size());
        } else if (defend_run->parsed()) {
            const auto outcomes = campaign.run_defense_pass();
            long d1_rejects = 0;
            for (const auto& [id, levels] : outcomes) {
                auto it = levels.find("D-1");
                if (it != levels.end() && it->second == ReviewVerdict::reject) ++d1_rejects;
            }
            std::printf("defense: D-1 run on %zu targets, %ld rejections\n", outcomes.size(),
                        d1_rejects);
        } else if (report_render->parsed()) {
            campaign.render_reports(opts.allow_partial);
            std::printf("reports written under %s\n",
                        (campaign.store().reports_dir()).string().c_str());
        }
        return 0;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        switch (e.code()) {
            case Errc::config_error:
            case Errc::empty_corpus:
            case Errc::malformed_layout:
            case Errc::malformed_workflow:
                return 2;
            case Errc::safety_violation:
                return 3;
            default:
                return 1;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
