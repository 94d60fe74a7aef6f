#include "shrinklogit/commands.hpp"

#include <fstream>
#include <sstream>

#include "shrinklogit/errors.hpp"
#include "shrinklogit/version.hpp"

namespace shrinklogit::cli {

namespace {

constexpr double kDefaultPtv = 0.75;

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

std::string_view source_name(ParamSource source) {
    return source == ParamSource::user ? "user" : "rule";
}

std::string_view weight_name(DroppedBlockWeight weight) {
    return weight == DroppedBlockWeight::as_printed ? "lambda" : "inverse_lambda";
}

Index resolve_components(const CliConfig& config, const SpectralDecomposition& decomp,
                         ParamSource& source, std::optional<double>& ptv) {
    if (config.r) {
        if (*config.r < 1 || *config.r > decomp.dimension()) {
            throw UsageError("r must lie in [1, " + std::to_string(decomp.dimension()) + "]");
        }
        source = ParamSource::user;
        return *config.r;
    }
    source = ParamSource::rule;
    ptv = config.ptv.value_or(kDefaultPtv);
    return select_components(decomp.values, *ptv);
}

ShrinkageParams resolve_shrinkage(const CliConfig& config, const SpectralDecomposition& decomp,
                                  const Vector& beta_ml) {
    ShrinkageParams params;
    if (config.d) {
        params.d = *config.d;
        params.d_source = ParamSource::user;
    } else {
        params.d = choose_d(decomp.values);
        params.d_source = ParamSource::rule;
    }
    if (config.k) {
        params.k = *config.k;
        params.k_source = ParamSource::user;
    } else {
        const KChoice k = choose_k(decomp.values, decomp.vectors.transpose() * beta_ml, params.d);
        params.k = k.k;
        params.k_clamped = k.clamped;
        params.k_source = ParamSource::rule;
    }
    params.validate();
    return params;
}

EstimatorSpec make_spec(EstimatorKind kind, Index r, const ShrinkageParams& params) {
    switch (kind) {
        case EstimatorKind::ml: return EstimatorSpec::ml();
        case EstimatorKind::ltl: return EstimatorSpec::ltl(params);
        case EstimatorKind::pclr: return EstimatorSpec::pclr(r);
        case EstimatorKind::pcltl: return EstimatorSpec::pcltl(r, params);
    }
    throw InvalidArgument("unknown estimator kind");
}

Dataset load_input(const CliConfig& config) {
    if (!config.input_path) throw UsageError("--input is required");
    return parse_dataset(*config.input_path, config.csv);
}

// Key/value rows for the delimited renderings.
class Rows {
public:
    void add(const std::string& key, const std::string& value) { rows_.emplace_back(key, value); }
    void add(const std::string& key, double value) { add(key, format_exact(value)); }
    void add_vector(const std::string& key, const Vector& v) {
        for (Index i = 0; i < v.size(); ++i) add(key + "[" + std::to_string(i + 1) + "]", v(i));
    }

    std::string render(char delimiter) const {
        std::ostringstream os;
        os << "key" << delimiter << "value\n";
        for (const auto& [key, value] : rows_) os << key << delimiter << value << '\n';
        return os.str();
    }

private:
    std::vector<std::pair<std::string, std::string>> rows_;
};

nlohmann::json verdict_to_json(const DominanceVerdict& v) {
    nlohmann::json j;
    j["comparison"] = std::string(to_string(v.comparison));
    j["condition_value"] = v.condition_value;
    j["holds"] = v.holds;
    j["precondition_met"] = v.precondition_met;
    if (v.oracle_min_eigenvalue) j["oracle_min_eigenvalue"] = *v.oracle_min_eigenvalue;
    if (v.oracle_holds) j["oracle_holds"] = *v.oracle_holds;
    if (v.psd_oracle_agrees) j["psd_oracle_agrees"] = *v.psd_oracle_agrees;
    if (v.msem_equal) j["msem_equal"] = *v.msem_equal;
    return j;
}

void add_verdict_rows(Rows& rows, const std::string& prefix, const DominanceVerdict& v) {
    rows.add(prefix + ".condition_value", v.condition_value);
    rows.add(prefix + ".holds", v.holds ? "true" : "false");
    rows.add(prefix + ".precondition_met", v.precondition_met ? "true" : "false");
    if (v.oracle_min_eigenvalue) rows.add(prefix + ".oracle_min_eigenvalue", *v.oracle_min_eigenvalue);
    if (v.oracle_holds) rows.add(prefix + ".oracle_holds", *v.oracle_holds ? "true" : "false");
    if (v.psd_oracle_agrees) {
        rows.add(prefix + ".psd_oracle_agrees", *v.psd_oracle_agrees ? "true" : "false");
    }
    if (v.msem_equal) rows.add(prefix + ".msem_equal", *v.msem_equal ? "true" : "false");
}

}  // namespace

std::optional<OutputFormat> parse_format(std::string_view name) {
    if (name == "tsv") return OutputFormat::tsv;
    if (name == "csv") return OutputFormat::csv;
    if (name == "json") return OutputFormat::json;
    return std::nullopt;
}

bool FitReport::all_ok() const {
    if (setup_error || !fit.converged) return false;
    for (const EstimateEntry& e : estimates) {
        if (e.error) return false;
    }
    return true;
}

FitReport run_fit_command(const CliConfig& config) {
    const Dataset data = load_input(config);
    FitReport report;
    report.n = data.rows();
    report.p = data.cols();
    report.fit = irls_fit(data, config.fit);
    report.score_norm = (data.x().transpose() *
                         (data.y() - predict_probabilities(data.x(), report.fit.beta,
                                                           config.fit.probability_clip)))
                            .lpNorm<Eigen::Infinity>();

    auto fail_all = [&](const std::string& message) {
        report.setup_error = message;
        for (EstimatorKind kind : config.estimators) {
            report.estimates.push_back({kind, std::nullopt, message});
        }
        return report;
    };
    if (!report.fit.converged) {
        return fail_all("IRLS did not converge within " +
                        std::to_string(config.fit.max_iterations) + " iterations");
    }

    const NormalEquations eq = NormalEquations::from_fit(report.fit, data.x());
    try {
        report.spectrum = spectral_decompose(eq.xtvx);
    } catch (const DecompositionError& e) {
        return fail_all(e.what());
    }
    const SpectralDecomposition& decomp = *report.spectrum;
    report.condition_number = decomp.values(0) / decomp.values(decomp.dimension() - 1);

    std::optional<std::string> r_error;
    try {
        report.r = resolve_components(config, decomp, report.r_source, report.ptv_threshold);
    } catch (const std::exception& e) {
        r_error = e.what();
    }
    std::optional<std::string> params_error;
    try {
        report.params = resolve_shrinkage(config, decomp, report.fit.beta);
    } catch (const std::exception& e) {
        params_error = e.what();
    }

    for (EstimatorKind kind : config.estimators) {
        EstimateEntry entry{kind, std::nullopt, std::nullopt};
        const bool needs_r = kind == EstimatorKind::pclr || kind == EstimatorKind::pcltl;
        const bool needs_params = kind == EstimatorKind::ltl || kind == EstimatorKind::pcltl;
        if (needs_params && params_error) {
            entry.error = params_error;
        } else if (needs_r && r_error) {
            entry.error = r_error;
        } else {
            try {
                const EstimatorSpec spec =
                    make_spec(kind, report.r.value_or(1), report.params.value_or(ShrinkageParams{}));
                entry.coefficients = estimate(spec, eq, decomp);
            } catch (const std::exception& e) {
                entry.error = e.what();
            }
        }
        report.estimates.push_back(std::move(entry));
    }
    return report;
}

nlohmann::json to_json(const FitReport& report) {
    nlohmann::json j;
    j["n"] = report.n;
    j["p"] = report.p;
    j["fit"] = {{"iterations", report.fit.iterations},
                {"converged", report.fit.converged},
                {"final_step_norm", report.fit.final_step_norm},
                {"log_likelihood", report.fit.log_likelihood},
                {"score_max_norm", report.score_norm}};
    if (report.setup_error) j["error"] = *report.setup_error;
    if (report.spectrum) {
        j["spectrum"] = {{"eigenvalues", to_std(report.spectrum->values)},
                         {"condition_number", report.condition_number}};
    }
    if (report.r) {
        nlohmann::json c = {{"r", *report.r}, {"source", source_name(report.r_source)}};
        if (report.ptv_threshold) c["ptv_threshold"] = *report.ptv_threshold;
        j["components"] = c;
    }
    if (report.params) {
        j["shrinkage"] = {{"k", report.params->k},
                          {"d", report.params->d},
                          {"k_source", source_name(report.params->k_source)},
                          {"d_source", source_name(report.params->d_source)},
                          {"k_clamped", report.params->k_clamped}};
    }
    j["estimates"] = nlohmann::json::array();
    for (const EstimateEntry& e : report.estimates) {
        nlohmann::json entry = {{"estimator", to_string(e.kind)}};
        if (e.coefficients) entry["coefficients"] = to_std(*e.coefficients);
        if (e.error) entry["error"] = *e.error;
        j["estimates"].push_back(entry);
    }
    return j;
}

std::string render_fit_report(const FitReport& report, OutputFormat format) {
    if (format == OutputFormat::json) return to_json(report).dump(2) + "\n";
    Rows rows;
    rows.add("n", std::to_string(report.n));
    rows.add("p", std::to_string(report.p));
    rows.add("fit.iterations", std::to_string(report.fit.iterations));
    rows.add("fit.converged", report.fit.converged ? "true" : "false");
    rows.add("fit.final_step_norm", report.fit.final_step_norm);
    rows.add("fit.log_likelihood", report.fit.log_likelihood);
    rows.add("fit.score_max_norm", report.score_norm);
    if (report.setup_error) rows.add("error", *report.setup_error);
    if (report.spectrum) {
        rows.add_vector("spectrum.eigenvalue", report.spectrum->values);
        rows.add("spectrum.condition_number", report.condition_number);
    }
    if (report.r) {
        rows.add("components.r", std::to_string(*report.r));
        rows.add("components.source", std::string(source_name(report.r_source)));
        if (report.ptv_threshold) rows.add("components.ptv_threshold", *report.ptv_threshold);
    }
    if (report.params) {
        rows.add("shrinkage.k", report.params->k);
        rows.add("shrinkage.d", report.params->d);
        rows.add("shrinkage.k_source", std::string(source_name(report.params->k_source)));
        rows.add("shrinkage.d_source", std::string(source_name(report.params->d_source)));
        rows.add("shrinkage.k_clamped", report.params->k_clamped ? "true" : "false");
    }
    for (const EstimateEntry& e : report.estimates) {
        const std::string prefix = "estimate." + std::string(to_string(e.kind));
        if (e.coefficients) rows.add_vector(prefix + ".beta", *e.coefficients);
        if (e.error) rows.add(prefix + ".error", *e.error);
    }
    return rows.render(format == OutputFormat::tsv ? '\t' : ',');
}

CompareReport run_compare_command(const CliConfig& config) {
    const Dataset data = load_input(config);
    const LogisticFit fit = irls_fit(data, config.fit);
    if (!fit.converged) {
        throw ConvergenceError("IRLS did not converge within " +
                               std::to_string(config.fit.max_iterations) + " iterations");
    }
    const NormalEquations eq = NormalEquations::from_fit(fit, data.x());
    const SpectralDecomposition decomp = spectral_decompose(eq.xtvx);

    CompareReport report;
    report.dropped_weight = config.dropped_weight;
    ParamSource r_source = ParamSource::rule;
    std::optional<double> ptv;
    report.r = resolve_components(config, decomp, r_source, ptv);
    try {
        report.params = resolve_shrinkage(config, decomp, fit.beta);
    } catch (const InvalidArgument& e) {
        throw UsageError(e.what());
    }

    if (config.beta_source == CompareBeta::file) {
        if (!config.beta_file) throw UsageError("--beta-file is required with --beta-source file");
        report.beta = parse_vector(*config.beta_file);
        if (report.beta.size() != data.cols()) {
            throw ParseError("beta file has " + std::to_string(report.beta.size()) +
                                 " values, expected " + std::to_string(data.cols()),
                             0);
        }
        report.beta_source = BetaSource::true_beta;
    } else {
        report.beta = fit.beta;
        report.beta_source = BetaSource::plug_in_mle;
    }

    const ComponentSplit split(decomp, report.r);
    for (const auto& [candidate, baseline] : config.pairs) {
        ComparisonEntry entry;
        entry.candidate = candidate;
        entry.baseline = baseline;
        const MsemReport cand = asymptotic_msem(make_spec(candidate, report.r, report.params),
                                                decomp, report.beta, report.beta_source);
        const MsemReport base = asymptotic_msem(make_spec(baseline, report.r, report.params),
                                                decomp, report.beta, report.beta_source);
        entry.candidate_smse = cand.smse;
        entry.baseline_smse = base.smse;
        entry.oracle = psd_dominates(base.msem, cand.msem);
        if (candidate == EstimatorKind::pcltl) {
            switch (baseline) {
                case EstimatorKind::ml:
                    entry.condition = ml_dominance_condition(report.beta, split, report.params,
                                                             config.dropped_weight);
                    break;
                case EstimatorKind::pclr:
                    entry.condition = pclr_dominance_condition(report.beta, split, report.params);
                    break;
                case EstimatorKind::ltl:
                    entry.condition = ltl_dominance_condition(report.beta, split, report.params);
                    break;
                case EstimatorKind::pcltl:
                    break;
            }
        }
        report.comparisons.push_back(std::move(entry));
    }
    return report;
}

nlohmann::json to_json(const CompareReport& report) {
    nlohmann::json j;
    j["beta_source"] = std::string(to_string(report.beta_source));
    j["beta"] = to_std(report.beta);
    j["r"] = report.r;
    j["shrinkage"] = {{"k", report.params.k},
                      {"d", report.params.d},
                      {"k_source", source_name(report.params.k_source)},
                      {"d_source", source_name(report.params.d_source)},
                      {"k_clamped", report.params.k_clamped}};
    j["dropped_block_weight"] = std::string(weight_name(report.dropped_weight));
    j["comparisons"] = nlohmann::json::array();
    for (const ComparisonEntry& e : report.comparisons) {
        nlohmann::json c;
        c["candidate"] = std::string(to_string(e.candidate));
        c["baseline"] = std::string(to_string(e.baseline));
        c["candidate_smse"] = e.candidate_smse;
        c["baseline_smse"] = e.baseline_smse;
        c["psd_oracle"] = verdict_to_json(e.oracle);
        if (e.condition) c["condition"] = verdict_to_json(*e.condition);
        j["comparisons"].push_back(c);
    }
    return j;
}

std::string render_compare_report(const CompareReport& report, OutputFormat format) {
    if (format == OutputFormat::json) return to_json(report).dump(2) + "\n";
    Rows rows;
    rows.add("beta_source", std::string(to_string(report.beta_source)));
    rows.add_vector("beta", report.beta);
    rows.add("r", std::to_string(report.r));
    rows.add("shrinkage.k", report.params.k);
    rows.add("shrinkage.d", report.params.d);
    rows.add("shrinkage.k_source", std::string(source_name(report.params.k_source)));
    rows.add("shrinkage.d_source", std::string(source_name(report.params.d_source)));
    rows.add("dropped_block_weight", std::string(weight_name(report.dropped_weight)));
    for (const ComparisonEntry& e : report.comparisons) {
        const std::string prefix = std::string(to_string(e.candidate)) + ":" +
                                   std::string(to_string(e.baseline));
        rows.add(prefix + ".candidate_smse", e.candidate_smse);
        rows.add(prefix + ".baseline_smse", e.baseline_smse);
        add_verdict_rows(rows, prefix + ".psd_oracle", e.oracle);
        if (e.condition) add_verdict_rows(rows, prefix + ".condition", *e.condition);
    }
    return rows.render(format == OutputFormat::tsv ? '\t' : ',');
}

StudyOutput run_simulate_command(const CliConfig& config) {
    StudyGrid grid = config.grid;
    grid.ptv_override = config.ptv;
    SimulationConfig base;
    base.replications = config.replications;
    base.seed = config.seed;
    base.fit = config.fit;

    StudyOutput out;
    out.cells = run_study(grid, base, SimulationOptions{config.threads, false},
                          FailurePolicy::record);
    out.tables = build_study_tables(out.cells);
    out.document = study_to_json(out.cells, config.seed, config.replications);
    std::ostringstream text;
    text << render_study_text(out.tables);
    text << "replications=" << config.replications << " master_seed=" << config.seed
         << " shrinklogit " << kVersion << "\n";
    out.text = text.str();
    return out;
}

void write_study_output(const StudyOutput& output, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::ofstream json(dir / "study.json");
    json << output.document.dump(2) << '\n';
    std::ofstream text(dir / "tables.txt");
    text << output.text;
    if (!json || !text) {
        throw std::runtime_error("cannot write study output to " + dir.string());
    }
}

}  // namespace shrinklogit::cli
