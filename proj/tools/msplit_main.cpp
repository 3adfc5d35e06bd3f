#include <chrono>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "msplit/advisor.hpp"
#include "msplit/chain.hpp"
#include "msplit/conformal.hpp"
#include "msplit/engine.hpp"
#include "msplit/io.hpp"
#include "msplit/plan.hpp"
#include "msplit/sde.hpp"
#include "msplit/stats.hpp"
#include "msplit/variance.hpp"

namespace {

using msplit::Json;

constexpr const char* kVersion = "msplit 0.1.0";

std::uint64_t read_seed(const Json& cfg) {
    const Json& v = msplit::require_key(cfg, "seed");
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer()) {
        const std::int64_t s = v.get<std::int64_t>();
        msplit::require(s >= 0, "config: key 'seed' must be a nonnegative integer");
        return std::uint64_t(s);
    }
    throw msplit::config_error("config: key 'seed' must be a nonnegative integer");
}

msplit::ChainSpec spec_of(const Json& cfg) {
    msplit::ChainSpec spec = msplit::spec_from_json(msplit::require_key(cfg, "spec"));
    spec.validate();
    return spec;
}

msplit::Plan plan_of(const Json& cfg, int M) {
    msplit::Plan plan = msplit::plan_from_json(msplit::require_key(cfg, "plan"));
    plan.validate(M);
    return plan;
}

msplit::CostModel model_of(const Json& cfg) {
    if (!cfg.contains("cost_model")) return msplit::unit_cost();
    return msplit::cost_model_from_name(msplit::require_string(cfg, "cost_model"));
}

Json run_estimate(const Json& cfg, std::uint64_t seed, int threads) {
    const msplit::ChainSpec spec = spec_of(cfg);
    const msplit::Plan plan = plan_of(cfg, spec.M);
    const std::int64_t n_rep = msplit::require_integer(cfg, "n_rep");
    msplit::require(n_rep >= 1, "config: key 'n_rep' must be at least 1");

    const msplit::EstimateSummary s = msplit::replicate(spec, plan, n_rep, seed, threads);
    const double p = msplit::chain_probability(spec);
    const msplit::VarianceReport vr = msplit::variance_two_part(spec, plan);

    Json results;
    results["n_rep"] = s.n_rep;
    results["p_hat"] = s.mean;
    results["standard_error"] = s.standard_error;
    results["sample_variance"] = s.sample_variance;
    results["extinction_rate"] = s.extinction_rate;
    results["analytic"]["p"] = p;
    results["analytic"]["variance_per_run"] = vr.total;
    results["analytic"]["deviation_in_se"] =
        s.standard_error > 0.0 ? std::abs(s.mean - p) / s.standard_error : 0.0;
    return results;
}

Json run_variance(const Json& cfg, std::uint64_t /*seed*/, int /*threads*/) {
    const msplit::ChainSpec spec = spec_of(cfg);
    const msplit::Plan plan = plan_of(cfg, spec.M);
    const msplit::CostModel model = model_of(cfg);

    const msplit::VarianceReport vr = msplit::variance_two_part(spec, plan);
    const double tele =
        msplit::variance_gamma_form(spec, plan, msplit::GammaForm::telescoping);
    const double sm =
        msplit::variance_gamma_form(spec, plan, msplit::GammaForm::second_moment);
    const double sig = msplit::variance_sigma_oracle(spec, plan);
    const msplit::CostReport cr = msplit::cost(spec, plan, model);

    double lo = vr.total, hi = vr.total;
    for (double v : {tele, sm, sig}) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }

    Json results;
    results["p"] = vr.p;
    results["entry_mass"] = spec.gamma1.total();
    results["relative_shape_term"] = vr.shape_term;
    results["relative_position_term"] = vr.position_term;
    results["variance_forms"]["two_part"] = vr.total;
    results["variance_forms"]["telescoping"] = tele;
    results["variance_forms"]["second_moment"] = sm;
    results["variance_forms"]["sigma_recursion"] = sig;
    results["variance_forms_spread"] = hi > 0.0 ? (hi - lo) / hi : 0.0;
    results["per_level_variance"] = vr.per_level;
    results["cost"]["model"] = model.name;
    results["cost"]["total"] = cr.total;
    results["cost"]["per_level"] = cr.per_level;
    return results;
}

Json run_optimize(const Json& cfg, std::uint64_t /*seed*/, int /*threads*/) {
    const double p = msplit::require_number(cfg, "p");
    const double budget = msplit::require_number(cfg, "budget");
    const msplit::CostModel model = model_of(cfg);
    std::int64_t r_fixed = 0;
    if (cfg.contains("R_fixed")) r_fixed = msplit::require_integer(cfg, "R_fixed");

    const msplit::OptimalPlan op = msplit::optimize_plan(p, budget, model, r_fixed);

    Json results;
    results["M"] = op.M;
    results["R"] = op.R;
    results["N"] = op.N;
    results["step_success_prob"] = op.success_prob;
    results["predicted_variance"] = op.predicted_variance;
    results["predicted_cost"] = op.predicted_cost;
    results["relative_std_error"] =
        p > 0.0 ? std::sqrt(op.predicted_variance) / p : 0.0;
    return results;
}

Json run_advise(const Json& cfg, std::uint64_t /*seed*/, int /*threads*/) {
    const msplit::ChainSpec spec = spec_of(cfg);
    const msplit::Plan plan = plan_of(cfg, spec.M);
    const msplit::CostModel model = model_of(cfg);
    const std::int64_t k = msplit::require_integer(cfg, "level");
    msplit::require(k >= 1 && k <= spec.M, "config: key 'level' must lie between 1 and M");

    const msplit::KernelChain chain(spec);
    const std::size_t size_prev = int(k) == 1 ? 1 : spec.level_size(int(k) - 1);
    msplit::LevelFn merged;
    if (cfg.contains("merged_step_cost")) {
        const double c = msplit::require_number(cfg, "merged_step_cost");
        msplit::require(c > 0.0, "config: key 'merged_step_cost' must be positive");
        merged = msplit::LevelFn(size_prev, c);
    } else {
        // Bill the merged double step as the cost of its first half plus
        // the survivor-average cost of its second, the same convention the
        // closed-form advice assumes.
        const msplit::SubKernel& P = chain.kernel(int(k));
        merged = msplit::LevelFn(size_prev, 0.0);
        for (std::size_t i = 0; i < size_prev; ++i) {
            const double gp = chain.g(int(k) - 1)[i];
            double c = model.c(gp);
            if (gp > 0.0) {
                double inner = 0.0;
                for (std::size_t j = 0; j < P.cols; ++j)
                    inner += P(i, j) * model.c(chain.g(int(k))[j]);
                c += inner / gp;
            }
            merged[i] = c;
        }
    }

    const std::vector<double> lambdas =
        msplit::cost_preserving_lambdas(spec, plan, int(k), model, merged);
    const msplit::DeletionSplit split =
        msplit::deletion_split(spec, plan, int(k), lambdas, model, merged);

    Json results;
    results["level"] = k;
    results["multipliers"] = lambdas;
    results["profile_after"] =
        msplit::reallocated_profile(plan.profile(spec.M), int(k), lambdas);
    results["variance_with"] = split.variance_total;
    results["variance_without"] = split.variance_without;
    results["corrective"] = split.corrective;
    results["cost_with"] = split.cost_total;
    results["cost_without"] = split.cost_without;
    results["drop_recommended"] = split.corrective > 0.0;

    bool one_dim = true;
    for (int lev = 1; lev <= spec.M; ++lev)
        if (spec.level_size(lev) != 1) one_dim = false;
    if (one_dim) {
        const double g_prev = chain.g(int(k) - 1)[0];
        const double g_k = chain.g(int(k))[0];
        const double c_prev = model.c(g_prev);
        const double c_k = model.c(g_k);
        const double a_k = c_prev / (c_prev + c_k);
        const msplit::DeletionReport dr =
            msplit::advise_deletion(g_prev, g_k, double(plan.R[std::size_t(k) - 1]), a_k);
        results["closed_form"]["beta"] = dr.beta;
        results["closed_form"]["lambda_prev"] = dr.lambda_prev;
        results["closed_form"]["Q"] = dr.Q;
        results["closed_form"]["case"] = dr.case_id;
        results["closed_form"]["drop_recommended"] = dr.drop;

        const msplit::InsertionAdvice ins = msplit::simplified_cost_optimum(dr.beta);
        results["insertion"]["beta"] = dr.beta;
        results["insertion"]["worthwhile"] = ins.worthwhile;
        if (ins.worthwhile) {
            results["insertion"]["g_star"] = ins.g_star;
            results["insertion"]["R_star"] = ins.R_star;
        }
    }
    return results;
}

Json run_perturb(const Json& cfg, std::uint64_t /*seed*/, int /*threads*/) {
    const msplit::ChainSpec spec = spec_of(cfg);
    const msplit::Plan plan = plan_of(cfg, spec.M);
    const msplit::CostModel model = model_of(cfg);
    const std::int64_t k = msplit::require_integer(cfg, "level");
    msplit::require(k >= 1 && k <= spec.M, "config: key 'level' must lie between 1 and M");

    double c_tilde_prev = 1.0, c_tilde_k = 1.0;
    if (cfg.contains("merged_cost_prev"))
        c_tilde_prev = msplit::require_number(cfg, "merged_cost_prev");
    if (cfg.contains("merged_cost_k"))
        c_tilde_k = msplit::require_number(cfg, "merged_cost_k");

    double K = 0.0;
    bool k_given = cfg.contains("K");
    if (k_given) {
        K = msplit::require_number(cfg, "K");
        msplit::require(std::isfinite(K) && K > 0.0, "config: key 'K' must be positive");
    } else {
        K = msplit::optimal_K(spec, plan, int(k), model, c_tilde_prev, c_tilde_k);
    }

    const msplit::PerturbedLevel pl = msplit::perturb_threshold(spec, int(k), K);
    const double p_before = msplit::chain_probability(spec);
    const double p_after = msplit::chain_probability(pl.perturbed);

    Json results;
    results["level"] = k;
    results["K"] = K;
    results["K_source"] = k_given ? "config" : "cost_neutral";
    results["factors"] = pl.factors.v;
    results["survival_after_move"] = pl.g_k_tilde;
    results["frontier_mass"] = pl.mass_tilde;
    results["p_before"] = p_before;
    results["p_after"] = p_after;
    results["cost_weighted_after"] =
        msplit::perturbed_cost(pl, plan, model, c_tilde_prev, c_tilde_k);
    results["perturbed_spec"] = msplit::spec_to_json(pl.perturbed);
    return results;
}

void stage_sidecars(const std::string& base, const msplit::StageReport& s) {
    const std::string stem = base + ".stage" + std::to_string(s.index);
    std::vector<std::vector<double>> angles;
    for (double a : s.hit_angles_pre) angles.push_back({a});
    msplit::write_sidecar(stem + ".angles.txt", {"theta"}, angles);
    std::vector<std::vector<double>> dens;
    for (auto [t, d] : s.density_curve) dens.push_back({t, d});
    msplit::write_sidecar(stem + ".density.txt", {"theta", "density"}, dens);
    if (!s.deformed) return;
    std::vector<std::vector<double>> post;
    for (double a : s.hit_params_post) post.push_back({a});
    msplit::write_sidecar(stem + ".post_angles.txt", {"theta"}, post);
    std::vector<std::vector<double>> pdens;
    for (auto [t, d] : s.post_density_curve) pdens.push_back({t, d});
    msplit::write_sidecar(stem + ".post_density.txt", {"theta", "density"}, pdens);
    std::vector<std::vector<double>> bnd;
    for (auto [x, y] : s.image_boundary) bnd.push_back({x, y});
    msplit::write_sidecar(stem + ".boundary.txt", {"x", "y"}, bnd);
}

Json run_pipeline(const Json& cfg, std::uint64_t seed, int threads, const std::string* out) {
    msplit::OUConfig ou = msplit::ou_from_json(msplit::require_key(cfg, "ou"));
    ou.seed = seed;
    ou.validate();

    const std::vector<double> rl =
        msplit::number_list(msplit::require_key(cfg, "radii"), "radii");
    msplit::require(rl.size() == 3, "config: key 'radii' must hold three thresholds");
    const std::array<double, 3> radii{rl[0], rl[1], rl[2]};

    const std::int64_t N = msplit::require_integer(cfg, "N");
    const std::vector<std::int64_t> rs =
        msplit::integer_list(msplit::require_key(cfg, "R"), "R");
    msplit::require(rs.size() == 2, "config: key 'R' must hold two duplication factors");
    const std::array<std::int64_t, 2> R{rs[0], rs[1]};

    msplit::PipelineOptions opt;
    opt.deform = msplit::get_bool(cfg, "deform", true);
    if (cfg.contains("n_q")) opt.n_q = int(msplit::require_integer(cfg, "n_q"));
    if (cfg.contains("boundary_points"))
        opt.boundary_points = int(msplit::require_integer(cfg, "boundary_points"));
    if (cfg.contains("density_samples"))
        opt.density_samples = int(msplit::require_integer(cfg, "density_samples"));
    opt.threads = threads;

    const msplit::StagedReport rep = msplit::run_ou_pipeline(ou, radii, N, R, opt);

    Json results;
    results["p_hat"] = rep.p_hat;
    results["conditional"] = rep.conditional;
    results["extinct"] = rep.extinct;
    results["extinct_stage"] = rep.extinct_stage;
    results["containment_warning"] = rep.containment_warning;
    Json stages = Json::array();
    for (const msplit::StageReport& s : rep.stages) {
        Json js;
        js["index"] = s.index;
        js["deformed"] = s.deformed;
        js["launched"] = s.launched_pre;
        js["hits"] = s.hits_pre;
        js["killed"] = s.killed_pre;
        js["capped"] = s.capped_pre;
        js["ks_uniform"] = s.ks_pre;
        js["kappa"] = s.kappa;
        if (s.deformed) {
            js["uniform_blend"] = s.uniform_blend;
            js["launched_post"] = s.launched_post;
            js["hits_post"] = s.hits_post;
            js["killed_post"] = s.killed_post;
            js["capped_post"] = s.capped_post;
            js["ks_uniform_post"] = s.ks_post;
            js["kappa_post"] = s.kappa_post;
        }
        stages.push_back(std::move(js));
        if (out) stage_sidecars(*out, s);
    }
    results["stages"] = std::move(stages);
    return results;
}

Json run_conformal_demo(const Json& cfg, std::uint64_t /*seed*/, int /*threads*/,
                        const std::string* out) {
    const double radius = msplit::require_number(cfg, "radius");
    msplit::require(radius > 0.0, "config: key 'radius' must be positive");
    int grid = 256;
    if (cfg.contains("grid")) grid = int(msplit::require_integer(cfg, "grid"));
    int n_points = 512;
    if (cfg.contains("boundary_points"))
        n_points = int(msplit::require_integer(cfg, "boundary_points"));

    const Json& dj = msplit::require_key(cfg, "density");
    const std::string type = msplit::require_string(dj, "type", "density.type");
    msplit::BoundaryDensity bd;
    bd.radius = radius;
    if (type == "uniform") {
        bd.h = [](double) { return 1.0 / (2.0 * 3.14159265358979323846); };
    } else if (type == "von_mises") {
        const double mu = msplit::require_number(dj, "mu", "density.mu");
        const double kappa = msplit::require_number(dj, "kappa", "density.kappa");
        msplit::require(kappa > 0.0, "config: key 'density.kappa' must be positive");
        bd.h = [mu, kappa](double t) { return msplit::von_mises_density(t, mu, kappa); };
    } else {
        throw msplit::config_error(
            "config: key 'density.type' must be \"uniform\" or \"von_mises\"");
    }

    double target = 0.0;
    if (cfg.contains("target_perimeter"))
        target = msplit::require_number(cfg, "target_perimeter");

    const msplit::ConformalMap map(bd, grid, target);
    const msplit::BoundaryImage img = msplit::boundary_image(map, n_points);

    Json results;
    results["grid"] = grid;
    results["boundary_points"] = n_points;
    results["target_perimeter"] = map.target_perimeter();
    results["perimeter"] = img.perimeter;
    results["relative_perimeter_error"] =
        std::abs(img.perimeter - map.target_perimeter()) / map.target_perimeter();
    results["mean_boundary_log"] = map.mean_boundary_log();
    results["density_clamped"] = map.density_clamped();
    if (out) {
        std::vector<std::vector<double>> rows;
        for (auto [x, y] : img.points) rows.push_back({x, y});
        msplit::write_sidecar(*out + ".boundary.txt", {"x", "y"}, rows);
    }
    return results;
}

int run(const std::string& config_path, const std::string& out_flag, bool seed_given,
        std::uint64_t seed_flag, int threads) {
    const Json cfg = msplit::parse_config_text(msplit::read_text_file(config_path));
    const std::string mode = msplit::require_string(cfg, "mode");

    const bool stochastic = mode == "estimate" || mode == "ou-pipeline";
    std::uint64_t seed = 0;
    if (seed_given)
        seed = seed_flag;
    else if (cfg.contains("seed"))
        seed = read_seed(cfg);
    else if (stochastic)
        throw msplit::config_error("config: missing key 'seed'");

    std::string out_path = out_flag;
    if (out_path.empty() && cfg.contains("out")) out_path = msplit::require_string(cfg, "out");
    const std::string* out = out_path.empty() ? nullptr : &out_path;

    const auto t0 = std::chrono::steady_clock::now();
    Json results;
    if (mode == "estimate")
        results = run_estimate(cfg, seed, threads);
    else if (mode == "variance")
        results = run_variance(cfg, seed, threads);
    else if (mode == "optimize")
        results = run_optimize(cfg, seed, threads);
    else if (mode == "advise")
        results = run_advise(cfg, seed, threads);
    else if (mode == "perturb")
        results = run_perturb(cfg, seed, threads);
    else if (mode == "ou-pipeline")
        results = run_pipeline(cfg, seed, threads, out);
    else if (mode == "conformal-demo")
        results = run_conformal_demo(cfg, seed, threads, out);
    else
        throw msplit::config_error(
            "config: key 'mode' must be one of estimate, variance, optimize, advise, "
            "perturb, ou-pipeline, conformal-demo");
    const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;

    Json echo = cfg;
    echo["seed"] = seed;

    Json report;
    report["version"] = kVersion;
    report["mode"] = mode;
    report["seed"] = seed;
    report["config"] = std::move(echo);
    report["results"] = std::move(results);
    report["wall_seconds"] = dt.count();

    if (out) {
        msplit::append_report(*out, report);
        std::cout << "report appended to " << *out << "\n";
    } else {
        std::cout << msplit::format_report(report);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Rare-event splitting estimators, design advice, and the "
                 "Ornstein-Uhlenbeck staged pipeline"};
    std::string config_path;
    std::string out_path;
    std::uint64_t seed = 0;
    int threads = 0;
    app.add_option("--config", config_path, "experiment configuration file")->required();
    app.add_option("--out", out_path, "report file (appended; sidecars share the stem)");
    CLI::Option* seed_opt =
        app.add_option("--seed", seed, "replaces the seed in the configuration");
    app.add_option("--threads", threads, "worker threads; 0 picks the library default");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        return run(config_path, out_path, seed_opt->count() > 0, seed, threads);
    } catch (const msplit::config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const msplit::infeasible_error& e) {
        std::cerr << "infeasible: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
