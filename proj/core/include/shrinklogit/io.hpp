#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "shrinklogit/model.hpp"
#include "shrinklogit/simulation.hpp"

namespace shrinklogit {

/// Comma-delimited numeric text with '.' decimals and an optional header row.
struct CsvOptions {
    bool has_header = true;
    std::size_t response_column = 0;
    char delimiter = ',';
};

/// Reads a dataset; every column other than the response becomes a covariate, in file order.
/// Throws ParseError (with a 1-based line number) on ragged rows, non-numeric
/// cells or a response outside {0, 1}.
Dataset parse_dataset(std::istream& in, const CsvOptions& options = {});
Dataset parse_dataset(const std::filesystem::path& path, const CsvOptions& options = {});

/// Writes a dataset readable by parse_dataset with the same options. Values use the
/// shortest representation that round-trips exactly.
void write_dataset(std::ostream& out, const Dataset& data, const CsvOptions& options = {});

/// Whitespace- or comma-separated numbers, '#' starts a comment.
Vector parse_vector(std::istream& in);
Vector parse_vector(const std::filesystem::path& path);

/// Shortest round-trip decimal for a double.
std::string format_exact(double value);
/// Fixed notation with the given number of decimals.
std::string format_fixed(double value, int decimals);

/// Simulated MSE table for one p: estimator rows (MLE, LTL, PCLR, PCLTL) by (n, rho) columns.
struct StudyTable {
    Index p = 0;
    std::vector<Index> n_values;
    std::vector<double> rho_values;
    // rows[kind][column]; column = n_index * rho_values.size() + rho_index.
    // Empty optionals mark failed cells.
    std::array<std::vector<std::optional<double>>, 4> rows;
};

/// Groups cells by p in order of first appearance; columns follow the order
/// of n and rho in the cells.
std::vector<StudyTable> build_study_tables(const std::vector<CellResult>& cells);

/// Human-readable tables with 4 decimals: estimator rows by (n, rho) columns, one table per p.
std::string render_study_text(const std::vector<StudyTable>& tables);

nlohmann::json cell_to_json(const CellResult& cell);

/// Full-precision study document with the master seed and library version stamp.
nlohmann::json study_to_json(const std::vector<CellResult>& cells, std::uint64_t master_seed,
                             int replications);

}  // namespace shrinklogit
