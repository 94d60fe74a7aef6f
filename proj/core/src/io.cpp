#include "shrinklogit/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string_view>

#include "shrinklogit/errors.hpp"
#include "shrinklogit/estimators.hpp"
#include "shrinklogit/version.hpp"

namespace shrinklogit {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split(std::string_view line, char delimiter) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(delimiter, start);
        fields.push_back(trim(line.substr(start, pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return fields;
}

std::optional<double> parse_double(std::string_view text) {
    if (!text.empty() && text.front() == '+') text.remove_prefix(1);
    if (text.empty()) return std::nullopt;
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(value)) {
        return std::nullopt;
    }
    return value;
}

std::string estimator_label(EstimatorKind kind) {
    switch (kind) {
        case EstimatorKind::ml: return "MLE";
        case EstimatorKind::ltl: return "LTL";
        case EstimatorKind::pclr: return "PCLR";
        case EstimatorKind::pcltl: return "PCLTL";
    }
    return "?";
}

}  // namespace

Dataset parse_dataset(std::istream& in, const CsvOptions& options) {
    std::vector<std::vector<double>> rows;
    std::size_t width = 0;
    std::string line;
    std::size_t line_no = 0;
    bool header_pending = options.has_header;

    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        if (header_pending) {
            header_pending = false;
            width = split(line, options.delimiter).size();
            continue;
        }
        const auto fields = split(line, options.delimiter);
        if (width == 0) width = fields.size();
        if (fields.size() != width) {
            throw ParseError("line " + std::to_string(line_no) + ": expected " +
                                 std::to_string(width) + " fields, found " +
                                 std::to_string(fields.size()),
                             line_no);
        }
        std::vector<double> row;
        row.reserve(width);
        for (std::size_t c = 0; c < fields.size(); ++c) {
            const auto value = parse_double(fields[c]);
            if (!value) {
                throw ParseError("line " + std::to_string(line_no) + ", column " +
                                     std::to_string(c + 1) + ": non-numeric value '" +
                                     std::string(fields[c]) + "'",
                                 line_no);
            }
            row.push_back(*value);
        }
        const double response = row[std::min(options.response_column, row.size() - 1)];
        if (options.response_column < row.size() && response != 0.0 && response != 1.0) {
            throw ParseError("line " + std::to_string(line_no) + ": response value " +
                                 format_exact(response) + " is not 0 or 1",
                             line_no);
        }
        rows.push_back(std::move(row));
    }

    if (rows.empty()) throw ParseError("no data rows", line_no);
    if (options.response_column >= width) {
        throw ParseError("response column " + std::to_string(options.response_column) +
                             " is out of range for " + std::to_string(width) + " columns",
                         0);
    }
    if (width < 2) throw ParseError("need at least one covariate column", 0);

    const auto n = static_cast<Index>(rows.size());
    const auto p = static_cast<Index>(width - 1);
    Matrix x(n, p);
    Vector y(n);
    for (Index i = 0; i < n; ++i) {
        const auto& row = rows[static_cast<std::size_t>(i)];
        Index col = 0;
        for (std::size_t c = 0; c < width; ++c) {
            if (c == options.response_column) {
                y(i) = row[c];
            } else {
                x(i, col++) = row[c];
            }
        }
    }
    return Dataset(std::move(x), std::move(y));
}

Dataset parse_dataset(const std::filesystem::path& path, const CsvOptions& options) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path.string(), 0);
    return parse_dataset(in, options);
}

void write_dataset(std::ostream& out, const Dataset& data, const CsvOptions& options) {
    const Index p = data.cols();
    const auto width = static_cast<std::size_t>(p + 1);
    if (options.response_column >= width) {
        throw InvalidArgument("write_dataset: response column out of range");
    }
    auto emit_row = [&](auto&& field) {
        Index col = 0;
        for (std::size_t c = 0; c < width; ++c) {
            if (c > 0) out << options.delimiter;
            out << (c == options.response_column ? field(-1) : field(col++));
        }
        out << '\n';
    };
    if (options.has_header) {
        emit_row([](Index j) { return j < 0 ? std::string("y") : "x" + std::to_string(j + 1); });
    }
    for (Index i = 0; i < data.rows(); ++i) {
        emit_row([&](Index j) {
            return j < 0 ? format_exact(data.y()(i)) : format_exact(data.x()(i, j));
        });
    }
}

Vector parse_vector(std::istream& in) {
    std::vector<double> values;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view view(line);
        if (const auto hash = view.find('#'); hash != std::string_view::npos) {
            view = view.substr(0, hash);
        }
        std::string cleaned(view);
        std::replace(cleaned.begin(), cleaned.end(), ',', ' ');
        std::istringstream tokens(cleaned);
        std::string token;
        while (tokens >> token) {
            const auto value = parse_double(token);
            if (!value) {
                throw ParseError("line " + std::to_string(line_no) + ": non-numeric value '" +
                                     token + "'",
                                 line_no);
            }
            values.push_back(*value);
        }
    }
    if (values.empty()) throw ParseError("vector file holds no values", 0);
    return Eigen::Map<const Vector>(values.data(), static_cast<Index>(values.size()));
}

Vector parse_vector(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path.string(), 0);
    return parse_vector(in);
}

std::string format_exact(double value) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, ptr);
}

std::string format_fixed(double value, int decimals) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(decimals) << value;
    return os.str();
}

std::vector<StudyTable> build_study_tables(const std::vector<CellResult>& cells) {
    std::vector<StudyTable> tables;
    auto append_unique = [](auto& list, auto value) {
        if (std::find(list.begin(), list.end(), value) == list.end()) list.push_back(value);
    };
    for (const CellResult& cell : cells) {
        auto it = std::find_if(tables.begin(), tables.end(),
                               [&](const StudyTable& t) { return t.p == cell.config.p; });
        if (it == tables.end()) {
            tables.push_back(StudyTable{});
            tables.back().p = cell.config.p;
            it = std::prev(tables.end());
        }
        append_unique(it->n_values, cell.config.n);
        append_unique(it->rho_values, cell.config.rho);
    }
    for (StudyTable& table : tables) {
        const std::size_t columns = table.n_values.size() * table.rho_values.size();
        for (auto& row : table.rows) row.assign(columns, std::nullopt);
    }
    for (const CellResult& cell : cells) {
        auto& table = *std::find_if(tables.begin(), tables.end(),
                                    [&](const StudyTable& t) { return t.p == cell.config.p; });
        const auto n_idx = static_cast<std::size_t>(
            std::find(table.n_values.begin(), table.n_values.end(), cell.config.n) -
            table.n_values.begin());
        const auto rho_idx = static_cast<std::size_t>(
            std::find(table.rho_values.begin(), table.rho_values.end(), cell.config.rho) -
            table.rho_values.begin());
        const std::size_t column = n_idx * table.rho_values.size() + rho_idx;
        if (cell.failure) continue;
        for (EstimatorKind kind : kAllEstimators) {
            table.rows[static_cast<std::size_t>(kind)][column] = cell.mse_of(kind);
        }
    }
    return tables;
}

std::string render_study_text(const std::vector<StudyTable>& tables) {
    constexpr int kWidth = 12;
    std::ostringstream os;
    for (const StudyTable& table : tables) {
        os << "Simulated MSE values of the estimators when p = " << table.p << "\n";
        os << std::left << std::setw(8) << "n";
        for (Index n : table.n_values) {
            os << std::left << std::setw(kWidth * static_cast<int>(table.rho_values.size()))
               << n;
        }
        os << "\n" << std::setw(8) << "rho";
        for (std::size_t i = 0; i < table.n_values.size(); ++i) {
            for (double rho : table.rho_values) os << std::setw(kWidth) << format_exact(rho);
        }
        os << "\n";
        for (EstimatorKind kind : kAllEstimators) {
            os << std::setw(8) << estimator_label(kind);
            for (const auto& value : table.rows[static_cast<std::size_t>(kind)]) {
                os << std::setw(kWidth) << (value ? format_fixed(*value, 4) : "FAILED");
            }
            os << "\n";
        }
        os << "\n";
    }
    return os.str();
}

nlohmann::json cell_to_json(const CellResult& cell) {
    nlohmann::json j;
    j["p"] = cell.config.p;
    j["n"] = cell.config.n;
    j["rho"] = cell.config.rho;
    j["replications"] = cell.config.replications;
    j["ptv_threshold"] = cell.config.ptv_threshold;
    j["seed"] = cell.config.seed;
    if (cell.failure) {
        j["failure"] = *cell.failure;
        return j;
    }
    nlohmann::json mse = nlohmann::json::object();
    for (EstimatorKind kind : kAllEstimators) mse[estimator_label(kind)] = cell.mse_of(kind);
    j["mse"] = mse;
    j["converged_replications"] = cell.converged_replications;
    j["divergent_replications"] = cell.divergent_replications;
    j["k_clamped_replications"] = cell.k_clamped_replications;
    j["mean_r"] = cell.mean_r;
    j["mean_k"] = cell.mean_k;
    j["mean_d"] = cell.mean_d;
    j["mean_ml_asymptotic_smse"] = cell.mean_ml_smse;
    j["true_beta"] = std::vector<double>(cell.true_beta.data(),
                                         cell.true_beta.data() + cell.true_beta.size());
    return j;
}

nlohmann::json study_to_json(const std::vector<CellResult>& cells, std::uint64_t master_seed,
                             int replications) {
    nlohmann::json j;
    j["software"] = {{"name", "shrinklogit"}, {"version", kVersion}};
    j["master_seed"] = master_seed;
    j["replications"] = replications;
    j["cells"] = nlohmann::json::array();
    for (const CellResult& cell : cells) j["cells"].push_back(cell_to_json(cell));
    return j;
}

}  // namespace shrinklogit
