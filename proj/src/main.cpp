#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "CLI11.hpp"
#include "json.hpp"
#include "replay_shaper/baselines.hpp"
#include "replay_shaper/learner.hpp"
#include "replay_shaper/render.hpp"
#include "replay_shaper/safety.hpp"
#include "replay_shaper/verify.hpp"

namespace fs = std::filesystem;
using namespace replay_shaper;
using nlohmann::ordered_json;

namespace {

constexpr double kRiskVarianceThreshold = 100.0;

struct ExperimentOptions {
    std::string env = "env1";
    std::string algo = "replay";
    double v = 0.5;
    double beta = 5.0;
    std::optional<double> gamma;
    long long episodes = 50000;
    std::vector<std::uint64_t> seeds = {1, 2, 3};
    int t0 = 500;
    double alpha_exp = 0.6;
    double kappa = 0.5;
    std::string out = "out";
};

struct Environment {
    TabularMdp mdp;
    GridWorldSpec spec;
};

void add_experiment_flags(CLI::App* cmd, ExperimentOptions& opt) {
    cmd->add_option("--env", opt.env, "env1 | env2 | path to a GridWorldSpec JSON");
    cmd->add_option("--v", opt.v, "replay probability");
    cmd->add_option("--beta", opt.beta, "softmin temperature");
    cmd->add_option_function<double>(
        "--gamma", [&opt](double g) { opt.gamma = g; }, "discount (default: env-specific)");
    cmd->add_option("--episodes", opt.episodes, "episodes per run");
    cmd->add_option("--seeds,--seed", opt.seeds, "run seeds");
    cmd->add_option("--t0", opt.t0, "initial pure-exploration steps");
    cmd->add_option("--alpha-exp", opt.alpha_exp, "learning-rate exponent");
    cmd->add_option("--kappa", opt.kappa, "risk-sensitive asymmetry");
    cmd->add_option("--out", opt.out, "output directory");
}

std::optional<Environment> load_env(const std::string& name,
                                    const std::optional<double>& gamma) {
    if (name == "env1") {
        auto [m, s] = build_env1(gamma.value_or(0.9));
        return Environment{std::move(m), std::move(s)};
    }
    if (name == "env2") {
        auto [m, s] = build_env2(gamma.value_or(0.95));
        return Environment{std::move(m), std::move(s)};
    }
    if (fs::exists(name)) {
        std::ifstream in(name);
        std::stringstream buf;
        buf << in.rdbuf();
        auto spec = GridWorldSpec::from_json(buf.str());
        auto mdp = build_grid_mdp(spec, gamma.value_or(0.95));
        return Environment{std::move(mdp), std::move(spec)};
    }
    return std::nullopt;
}

std::string git_describe() {
    FILE* pipe = popen("git describe --always --dirty 2>/dev/null", "r");
    if (!pipe) return "unknown";
    char buf[256];
    std::string out;
    while (fgets(buf, sizeof(buf), pipe)) out += buf;
    pclose(pipe);
    while (!out.empty() && (out.back() == '\n' || out.back() == '\r')) out.pop_back();
    return out.empty() ? "unknown" : out;
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    out << content;
    if (!out) throw std::runtime_error("failed to write " + path.string());
}

/// Manifest is written atomically (temp + rename) and only after all other
/// artifacts succeeded.
void write_manifest(const fs::path& dir, const ordered_json& manifest) {
    fs::path tmp = dir / ".manifest.json.tmp";
    write_file(tmp, manifest.dump(2) + "\n");
    fs::rename(tmp, dir / "manifest.json");
}

struct RunArtifacts {
    QTable q;
    RunLog log;
    std::vector<int> policy;
    RiskMetrics risk;
};

RunArtifacts execute(const Environment& env, const ExperimentOptions& opt,
                     const std::string& algo, std::uint64_t seed) {
    LearnerConfig cfg;
    cfg.v = opt.v;
    cfg.gamma = env.mdp.gamma();
    cfg.t0 = opt.t0;
    cfg.alpha_exponent = opt.alpha_exp;
    cfg.episodes = opt.episodes;
    cfg.seed = seed;

    RunArtifacts art;
    if (algo == "replay") {
        SchemeConfig scheme;
        scheme.beta = opt.beta;
        auto limit = limiting_weights(env.mdp, opt.beta);
        cfg.checkpoint_iterations = {1000, 10000, 100000};
        auto res = run_algorithm1(env.mdp, cfg, scheme, &limit);
        art.q = std::move(res.q);
        art.log = std::move(res.log);
    } else if (algo == "plain") {
        auto res = run_plain_q(env.mdp, cfg);
        art.q = std::move(res.q);
        art.log = std::move(res.log);
    } else if (algo == "risk_sensitive") {
        RiskSensitiveConfig rs;
        rs.base = cfg;
        rs.kappa = opt.kappa;
        auto res = run_risk_sensitive_q(env.mdp, rs);
        art.q = std::move(res.q);
        art.log = std::move(res.log);
    } else if (algo == "worst_case") {
        auto res = run_worst_case_q(env.mdp, cfg);
        art.q = std::move(res.q);
        art.log = std::move(res.log);
    } else {
        throw std::runtime_error("unknown algorithm: " + algo);
    }

    art.policy = greedy_policy(art.q);
    std::set<int> cliff(env.spec.cliff_cells.begin(), env.spec.cliff_cells.end());
    art.risk = policy_risk_profile(env.mdp, art.policy, cliff, kRiskVarianceThreshold, 10000,
                                   seed);
    return art;
}

ordered_json options_json(const ExperimentOptions& opt, const std::string& algo,
                          std::uint64_t seed, double gamma) {
    ordered_json j;
    j["env"] = opt.env;
    j["algo"] = algo;
    j["v"] = opt.v;
    j["beta"] = opt.beta;
    j["gamma"] = gamma;
    j["episodes"] = opt.episodes;
    j["seed"] = seed;
    j["t0"] = opt.t0;
    j["alpha_exp"] = opt.alpha_exp;
    j["kappa"] = opt.kappa;
    j["risk_variance_threshold"] = kRiskVarianceThreshold;
    return j;
}

void write_run_artifacts(const fs::path& dir, const Environment& env,
                         const ExperimentOptions& opt, const std::string& algo,
                         std::uint64_t seed, const RunArtifacts& art) {
    fs::create_directories(dir);
    write_file(dir / "policy.txt", ascii_policy(env.spec, art.policy));
    write_file(dir / "policy.svg", svg_policy(env.spec, art.policy));
    write_file(dir / "learning_curve.csv", art.log.to_csv());
    write_file(dir / "risk.json", art.risk.to_json() + "\n");
    write_file(dir / "qtable.json", art.q.to_json() + "\n");
    write_file(dir / "grid_spec.json", env.spec.to_json() + "\n");

    ordered_json manifest;
    manifest["config"] = options_json(opt, algo, seed, env.mdp.gamma());
    manifest["git"] = git_describe();
    manifest["artifacts"] = {"policy.txt",          "policy.svg", "risk.json",
                             "learning_curve.csv", "qtable.json", "grid_spec.json"};
    write_manifest(dir, manifest);
}

int cmd_run(const ExperimentOptions& opt) {
    auto env = load_env(opt.env, opt.gamma);
    if (!env) {
        std::cerr << "unknown environment '" << opt.env
                  << "' (expected env1, env2, or a spec file)\n"
                  << "usage: replay-shaper run --env env1 --algo replay --seeds 1 2 3\n";
        return 2;
    }
    for (auto seed : opt.seeds) {
        auto art = execute(*env, opt, opt.algo, seed);
        fs::path dir = fs::path(opt.out) / (opt.algo + "-seed" + std::to_string(seed));
        write_run_artifacts(dir, *env, opt, opt.algo, seed, art);
        std::cout << opt.algo << " seed " << seed << ": return " << art.risk.mean_return
                  << ", risky " << art.risk.risky_traversal_prob << ", catastrophe "
                  << art.risk.catastrophe_prob << "\n"
                  << ascii_policy(env->spec, art.policy);
    }
    return 0;
}

int cmd_compare(const ExperimentOptions& opt, const std::vector<std::string>& algos) {
    auto env = load_env(opt.env, opt.gamma);
    if (!env) {
        std::cerr << "unknown environment '" << opt.env << "'\n";
        return 2;
    }
    ordered_json table = ordered_json::array();
    std::cout << "algo            seed   return  risky_prob  catastrophe\n";
    for (const auto& algo : algos) {
        for (auto seed : opt.seeds) {
            auto art = execute(*env, opt, algo, seed);
            fs::path dir = fs::path(opt.out) / (algo + "-seed" + std::to_string(seed));
            write_run_artifacts(dir, *env, opt, algo, seed, art);
            std::printf("%-15s %4llu %8.2f %11.4f %12.4f\n", algo.c_str(),
                        static_cast<unsigned long long>(seed), art.risk.mean_return,
                        art.risk.risky_traversal_prob, art.risk.catastrophe_prob);
            table.push_back({{"algo", algo},
                             {"seed", seed},
                             {"mean_return", art.risk.mean_return},
                             {"risky_traversal_prob", art.risk.risky_traversal_prob},
                             {"catastrophe_prob", art.risk.catastrophe_prob},
                             {"policy", ascii_policy(env->spec, art.policy)}});
        }
    }
    for (const auto& row : table)
        std::cout << "--- " << row["algo"].get<std::string>() << " seed " << row["seed"]
                  << " ---\n"
                  << row["policy"].get<std::string>();
    fs::create_directories(opt.out);
    write_file(fs::path(opt.out) / "compare.json", table.dump(2) + "\n");
    return 0;
}

int cmd_verify(const std::string& suite, std::uint64_t seed, const std::string& out) {
    std::vector<SuiteResult> results;
    if (suite == "all") {
        results = verify_all(seed);
    } else if (suite == "contraction") {
        results.push_back(verify_contraction(seed));
    } else if (suite == "noise") {
        results.push_back(verify_noise(seed));
    } else if (suite == "lemma4") {
        results.push_back(verify_lemma4(seed));
    } else if (suite == "theorem1") {
        results.push_back(verify_theorem1(seed));
    } else if (suite == "theorem2") {
        results.push_back(verify_theorem2(seed));
    } else {
        std::cerr << "unknown suite '" << suite
                  << "' (contraction | noise | lemma4 | theorem1 | theorem2 | all)\n";
        return 2;
    }
    ordered_json report;
    report["seed"] = seed;
    bool all_ok = true;
    ordered_json suites = ordered_json::array();
    for (const auto& r : results) {
        all_ok = all_ok && r.passed;
        suites.push_back({{"name", r.name}, {"passed", r.passed}, {"details", r.details}});
        std::cout << r.name << ": " << (r.passed ? "pass" : "FAIL") << "\n";
    }
    report["suites"] = suites;
    report["passed"] = all_ok;
    fs::create_directories(out);
    write_file(fs::path(out) / "verify_report.json", report.dump(2) + "\n");
    return all_ok ? 0 : 1;
}

int cmd_render(const std::string& run_dir) {
    fs::path dir(run_dir);
    fs::path qpath = dir / "qtable.json";
    fs::path spath = dir / "grid_spec.json";
    if (!fs::exists(qpath) || !fs::exists(spath)) {
        std::cerr << "missing qtable.json or grid_spec.json in " << run_dir << "\n";
        return 1;
    }
    try {
        std::stringstream qbuf, sbuf;
        qbuf << std::ifstream(qpath).rdbuf();
        sbuf << std::ifstream(spath).rdbuf();
        auto q = QTable::from_json(qbuf.str());
        auto spec = GridWorldSpec::from_json(sbuf.str());
        auto policy = greedy_policy(q);
        write_file(dir / "policy.txt", ascii_policy(spec, policy));
        write_file(dir / "policy.svg", svg_policy(spec, policy));
        std::cout << ascii_policy(spec, policy);
    } catch (const std::exception& e) {
        std::cerr << "render failed: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    if (const char* threads = std::getenv("REPLAY_SHAPER_THREADS")) {
#ifdef _OPENMP
        int n = std::atoi(threads);
        if (n > 0) omp_set_num_threads(n);
#endif
    }

    CLI::App app{"Tabular Q-learning with variance-prioritized safe experience replay"};
    app.require_subcommand(1);

    ExperimentOptions run_opt;
    auto* run = app.add_subcommand("run", "run one algorithm and write artifacts");
    add_experiment_flags(run, run_opt);
    run->add_option("--algo", run_opt.algo, "replay | plain | risk_sensitive | worst_case");

    ExperimentOptions cmp_opt;
    std::vector<std::string> cmp_algos = {"replay", "plain"};
    auto* cmp = app.add_subcommand("compare", "run several algorithms side by side");
    add_experiment_flags(cmp, cmp_opt);
    cmp->add_option("--algos", cmp_algos, "algorithms to compare");

    std::string suite = "all";
    std::uint64_t verify_seed = 20;
    std::string verify_out = "out";
    auto* ver = app.add_subcommand("verify", "run the numerical verification suites");
    ver->add_option("--suite", suite, "contraction | noise | lemma4 | theorem1 | theorem2 | all");
    ver->add_option("--seed", verify_seed, "suite seed");
    ver->add_option("--out", verify_out, "report directory");

    std::string run_dir;
    auto* ren = app.add_subcommand("render", "regenerate policy renderings from a run dir");
    ren->add_option("dir", run_dir, "run directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(run_opt);
        if (cmp->parsed()) return cmd_compare(cmp_opt, cmp_algos);
        if (ver->parsed()) return cmd_verify(suite, verify_seed, verify_out);
        if (ren->parsed()) return cmd_render(run_dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
