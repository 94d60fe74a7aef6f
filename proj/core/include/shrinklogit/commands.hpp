#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "shrinklogit/estimators.hpp"
#include "shrinklogit/io.hpp"
#include "shrinklogit/msem.hpp"
#include "shrinklogit/simulation.hpp"

namespace shrinklogit::cli {

enum class ExitCode : int { success = 0, usage = 1, data = 2, numerical = 3 };

enum class OutputFormat { tsv, csv, json };

std::optional<OutputFormat> parse_format(std::string_view name);

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class CompareBeta { plugin, file };

struct CliConfig {
    std::optional<std::filesystem::path> input_path;
    std::optional<std::filesystem::path> output_path;
    OutputFormat format = OutputFormat::json;
    CsvOptions csv{};
    FitConfig fit{};

    std::vector<EstimatorKind> estimators{std::begin(kAllEstimators), std::end(kAllEstimators)};
    std::optional<double> k;
    std::optional<double> d;
    std::optional<Index> r;
    std::optional<double> ptv;

    // simulate
    StudyGrid grid{};
    int replications = 2000;
    std::uint64_t seed = 20170101;
    unsigned threads = 1;

    // compare: (candidate, baseline) pairs
    std::vector<std::pair<EstimatorKind, EstimatorKind>> pairs{
        {EstimatorKind::pcltl, EstimatorKind::ml}};
    CompareBeta beta_source = CompareBeta::plugin;
    std::optional<std::filesystem::path> beta_file;
    DroppedBlockWeight dropped_weight = DroppedBlockWeight::as_printed;
};

struct EstimateEntry {
    EstimatorKind kind = EstimatorKind::ml;
    std::optional<Vector> coefficients;
    std::optional<std::string> error;
};

struct FitReport {
    Index n = 0;
    Index p = 0;
    LogisticFit fit;
    double score_norm = 0.0;
    std::optional<SpectralDecomposition> spectrum;
    double condition_number = 0.0;
    std::optional<Index> r;
    ParamSource r_source = ParamSource::rule;
    std::optional<double> ptv_threshold;
    std::optional<ShrinkageParams> params;
    std::optional<std::string> setup_error;
    std::vector<EstimateEntry> estimates;

    bool all_ok() const;
};

/// Fits ML by IRLS, then evaluates each selected estimator at the converged V and z.
/// r comes from --r or the PTV rule; k and d individually from the user or the rules.
/// Estimator-level failures are recorded per entry without aborting the others.
FitReport run_fit_command(const CliConfig& config);
nlohmann::json to_json(const FitReport& report);
std::string render_fit_report(const FitReport& report, OutputFormat format);

struct ComparisonEntry {
    EstimatorKind candidate = EstimatorKind::pcltl;
    EstimatorKind baseline = EstimatorKind::ml;
    // Printed dominance condition; only for PCLTL against ML, PCLR or LTL.
    std::optional<DominanceVerdict> condition;
    // psd_dominates(msem_baseline, msem_candidate).
    DominanceVerdict oracle;
    double candidate_smse = 0.0;
    double baseline_smse = 0.0;
};

struct CompareReport {
    BetaSource beta_source = BetaSource::plug_in_mle;
    Vector beta;
    Index r = 0;
    ShrinkageParams params;
    DroppedBlockWeight dropped_weight = DroppedBlockWeight::as_printed;
    std::vector<ComparisonEntry> comparisons;
};

CompareReport run_compare_command(const CliConfig& config);
nlohmann::json to_json(const CompareReport& report);
std::string render_compare_report(const CompareReport& report, OutputFormat format);

struct StudyOutput {
    std::vector<CellResult> cells;
    std::vector<StudyTable> tables;
    nlohmann::json document;
    std::string text;
};

/// Failed cells are kept and rendered as FAILED rather than aborting the study.
StudyOutput run_simulate_command(const CliConfig& config);

/// Writes study.json and tables.txt into dir (created if missing).
void write_study_output(const StudyOutput& output, const std::filesystem::path& dir);

}  // namespace shrinklogit::cli
