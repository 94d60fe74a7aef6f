// shrinklogit command-line interface: fit, compare, simulate.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#if __has_include(<CLI11.hpp>)
#include <CLI11.hpp>
#else
#include <CLI/CLI.hpp>
#endif

#include "shrinklogit/commands.hpp"
#include "shrinklogit/errors.hpp"
#include "shrinklogit/version.hpp"

namespace sl = shrinklogit;
namespace cli = shrinklogit::cli;

namespace {

constexpr const char* kSeedEnv = "SHRINKLOGIT_SEED";

using List = std::vector<std::string>;

sl::EstimatorKind parse_kind(const std::string& name) {
    const auto kind = sl::parse_estimator_kind(name);
    if (!kind) throw cli::UsageError("unknown estimator '" + name + "'");
    return *kind;
}

template <class T>
std::vector<T> parse_numbers(const List& items, const char* flag) {
    std::vector<T> values;
    for (const std::string& item : items) {
        std::istringstream is(item);
        T value{};
        if (!(is >> value) || !is.eof()) {
            throw cli::UsageError(std::string("invalid value '") + item + "' for --" + flag);
        }
        values.push_back(value);
    }
    if (values.empty()) throw cli::UsageError(std::string("--") + flag + " needs values");
    return values;
}

void emit(const std::string& text, const cli::CliConfig& config) {
    if (config.output_path) {
        std::ofstream out(*config.output_path);
        out << text;
        if (!out) throw std::runtime_error("cannot write " + config.output_path->string());
    } else {
        std::cout << text;
    }
}

struct RawOptions {
    std::string input;
    std::string output;
    std::string format = "json";
    std::size_t response_col = 0;
    bool no_header = false;
    List estimators{"ml", "ltl", "pclr", "pcltl"};
    double tol = 1e-6;
    int max_iter = 100;
    List p_list{"4", "6", "8", "12"};
    List n_list{"200", "500", "1000"};
    List rho_list{"0.8", "0.9", "0.99", "0.999"};
    List pairs{"pcltl:ml"};
    std::string beta_source = "plugin";
    std::string beta_file;
    bool inverse_weight = false;
};

cli::CliConfig finish(const RawOptions& raw, cli::CliConfig config, bool parse_fit_options) {
    if (!raw.input.empty()) config.input_path = raw.input;
    if (!raw.output.empty()) config.output_path = raw.output;
    const auto format = cli::parse_format(raw.format);
    if (!format) throw cli::UsageError("--format must be tsv, csv or json");
    config.format = *format;
    config.csv.has_header = !raw.no_header;
    config.csv.response_column = raw.response_col;
    config.fit.tolerance = raw.tol;
    config.fit.max_iterations = raw.max_iter;
    try {
        config.fit.validate();
    } catch (const sl::InvalidArgument& e) {
        throw cli::UsageError(e.what());
    }
    if (config.k && !(*config.k > 0.0)) throw cli::UsageError("k must be positive");
    if (config.ptv && !(*config.ptv > 0.0 && *config.ptv <= 1.0)) {
        throw cli::UsageError("--ptv must lie in (0, 1]");
    }
    if (parse_fit_options) {
        config.estimators.clear();
        for (const auto& name : raw.estimators) {
            config.estimators.push_back(parse_kind(name));
        }
        if (config.estimators.empty()) throw cli::UsageError("--estimators needs values");
    }
    return config;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Liu-type and principal-component shrinkage estimators for logistic regression"};
    app.set_version_flag("--version", std::string(sl::kVersion));
    app.set_config("--config", "", "Key-value file mirroring the command-line flags");
    app.require_subcommand(1);

    RawOptions raw;
    cli::CliConfig config;
    std::optional<long long> r_flag;

    auto add_data_options = [&](CLI::App* cmd) {
        cmd->add_option("--input", raw.input, "CSV dataset")->required();
        cmd->add_option("--response-col", raw.response_col, "0-based response column");
        cmd->add_flag("--no-header", raw.no_header, "The CSV has no header row");
        cmd->add_option("--format", raw.format, "Output format: tsv, csv or json");
        cmd->add_option("--output", raw.output, "Write the report here instead of stdout");
        cmd->add_option("--k", config.k, "Biasing parameter k > 0 (default: rule)");
        cmd->add_option("--d", config.d, "Biasing parameter d (default: rule)");
        auto* r_opt = cmd->add_option("--r", r_flag, "Retained principal components");
        cmd->add_option("--ptv", config.ptv, "Total-variability share for r (default 0.75)")
            ->excludes(r_opt);
        cmd->add_option("--tol", raw.tol, "IRLS convergence tolerance");
        cmd->add_option("--max-iter", raw.max_iter, "IRLS iteration cap");
    };

    CLI::App* fit = app.add_subcommand("fit", "Fit the estimators to a CSV dataset");
    add_data_options(fit);
    fit->add_option("--estimators", raw.estimators, "Comma list of ml,ltl,pclr,pcltl")
        ->delimiter(',');

    CLI::App* compare = app.add_subcommand("compare", "Asymptotic MSEM comparison of estimators");
    add_data_options(compare);
    compare->add_option("--pair", raw.pairs, "Comma list of candidate:baseline pairs")
        ->delimiter(',');
    compare->add_option("--beta-source", raw.beta_source, "plugin or file");
    compare->add_option("--beta-file", raw.beta_file, "Coefficient vector for --beta-source file");
    compare->add_flag("--inverse-dropped-weight", raw.inverse_weight,
                      "Weight the dropped block of the PCLTL-vs-ML condition by Lambda^{-1}");

    CLI::App* simulate = app.add_subcommand("simulate", "Monte Carlo study over an (n, p, rho) grid");
    simulate->add_option("--p", raw.p_list, "Comma list of p values")
        ->delimiter(',');
    simulate->add_option("--n", raw.n_list, "Comma list of sample sizes")
        ->delimiter(',');
    simulate->add_option("--rho", raw.rho_list, "Comma list of correlation parameters")
        ->delimiter(',');
    simulate->add_option("--reps", config.replications, "Replications per cell");
    simulate->add_option("--seed", config.seed, "Master seed")->envname(kSeedEnv);
    simulate->add_option("--threads", config.threads, "Worker threads (0 = all cores)");
    simulate->add_option("--ptv", config.ptv, "Override the per-p PTV rule");
    simulate->add_option("--out", raw.output, "Directory for study.json and tables.txt");
    simulate->add_option("--tol", raw.tol, "IRLS convergence tolerance");
    simulate->add_option("--max-iter", raw.max_iter, "IRLS iteration cap");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : static_cast<int>(cli::ExitCode::usage);
    }

    try {
        if (r_flag) {
            if (*r_flag < 1) throw cli::UsageError("--r must be >= 1");
            config.r = static_cast<sl::Index>(*r_flag);
        }
        if (*fit) {
            config = finish(raw, config, true);
            const cli::FitReport report = cli::run_fit_command(config);
            emit(cli::render_fit_report(report, config.format), config);
            if (!report.fit.converged) return static_cast<int>(cli::ExitCode::numerical);
            return static_cast<int>(cli::ExitCode::success);
        }
        if (*compare) {
            config = finish(raw, config, false);
            config.pairs.clear();
            for (const std::string& pair : raw.pairs) {
                const auto colon = pair.find(':');
                if (colon == std::string::npos) {
                    throw cli::UsageError("--pair entries look like candidate:baseline");
                }
                config.pairs.emplace_back(parse_kind(pair.substr(0, colon)),
                                          parse_kind(pair.substr(colon + 1)));
            }
            if (raw.beta_source == "file") {
                config.beta_source = cli::CompareBeta::file;
                if (!raw.beta_file.empty()) config.beta_file = raw.beta_file;
            } else if (raw.beta_source != "plugin") {
                throw cli::UsageError("--beta-source must be plugin or file");
            }
            config.dropped_weight = raw.inverse_weight ? sl::DroppedBlockWeight::inverse
                                                       : sl::DroppedBlockWeight::as_printed;
            emit(cli::render_compare_report(cli::run_compare_command(config), config.format),
                 config);
            return static_cast<int>(cli::ExitCode::success);
        }
        if (*simulate) {
            const std::string out_dir = raw.output;
            raw.output.clear();
            config = finish(raw, config, false);
            config.grid.p_values = parse_numbers<sl::Index>(raw.p_list, "p");
            config.grid.n_values = parse_numbers<sl::Index>(raw.n_list, "n");
            config.grid.rho_values = parse_numbers<double>(raw.rho_list, "rho");
            if (config.replications < 1) throw cli::UsageError("--reps must be >= 1");
            for (double rho : config.grid.rho_values) {
                if (!(rho >= 0.0 && rho < 1.0)) throw cli::UsageError("--rho values must lie in [0, 1)");
            }
            for (sl::Index p : config.grid.p_values) {
                for (sl::Index n : config.grid.n_values) {
                    if (p < 2 || n <= p) throw cli::UsageError("need n > p >= 2 in every cell");
                }
            }
            const cli::StudyOutput out = cli::run_simulate_command(config);
            if (!out_dir.empty()) cli::write_study_output(out, out_dir);
            std::cout << out.text;
            for (const auto& cell : out.cells) {
                if (cell.failure) return static_cast<int>(cli::ExitCode::numerical);
            }
            return static_cast<int>(cli::ExitCode::success);
        }
    } catch (const cli::UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return static_cast<int>(cli::ExitCode::usage);
    } catch (const sl::ParseError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return static_cast<int>(cli::ExitCode::data);
    } catch (const sl::InvalidArgument& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return static_cast<int>(cli::ExitCode::data);
    } catch (const sl::SingularSystemError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return static_cast<int>(cli::ExitCode::numerical);
    } catch (const sl::DecompositionError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return static_cast<int>(cli::ExitCode::numerical);
    } catch (const sl::ConvergenceError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return static_cast<int>(cli::ExitCode::numerical);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return static_cast<int>(cli::ExitCode::numerical);
    }
    return static_cast<int>(cli::ExitCode::usage);
}
