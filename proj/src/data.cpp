#include "confex/data.hpp"

#include "confex/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

namespace confex {

namespace {

constexpr double kRankTolerance = 1e-10;

std::string trim(std::string_view s) {
  auto begin = s.find_first_not_of(" \t");
  if (begin == std::string_view::npos) return {};
  auto end = s.find_last_not_of(" \t");
  return std::string(s.substr(begin, end - begin + 1));
}

bool is_missing_token(const std::string& cell) {
  return cell.empty() || cell == "NA" || cell == "NaN";
}

// Parses a trimmed cell. nullopt for missing or unparseable cells.
std::optional<double> parse_number(const std::string& raw) {
  std::string cell = trim(raw);
  if (is_missing_token(cell)) return std::nullopt;
  std::string_view view = cell;
  if (view.front() == '+') view.remove_prefix(1);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(view.data(), view.data() + view.size(), value);
  if (ec != std::errc() || ptr != view.data() + view.size()) return std::nullopt;
  if (!std::isfinite(value)) return std::nullopt;
  return value;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  if (in.bad()) throw Error(ErrorCode::IoFailure, "read failed for " + path.string());
  return buffer.str();
}

double singular_ratio(const Eigen::MatrixXd& r) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(r);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return 0.0;
  return s(s.size() - 1) / s(0);
}

}  // namespace

void check_covariate_rank(const Eigen::MatrixXd& covariates, std::span<const std::string> names) {
  const Index n = covariates.rows();
  const Index cols = covariates.cols() + 1;
  auto name_of = [&](Index j) {
    return j < static_cast<Index>(names.size()) ? names[j] : "column " + std::to_string(j);
  };
  for (Index j = 0; j < covariates.cols(); ++j) {
    if (covariates.col(j).maxCoeff() == covariates.col(j).minCoeff())
      throw Error(ErrorCode::DegenerateColumn, "covariate '" + name_of(j) + "' is constant");
  }
  if (n < cols)
    throw Error(ErrorCode::DegenerateColumn,
                "covariates plus intercept (" + std::to_string(cols) + ") exceed rows (" +
                    std::to_string(n) + ")");

  Eigen::MatrixXd z(n, cols);
  z.col(0).setOnes();
  z.rightCols(cols - 1) = covariates;
  for (Index j = 0; j < cols; ++j) z.col(j) /= z.col(j).norm();

  // Householder QR without pivoting keeps column order, so the leading block of
  // R is the R factor of each column prefix.
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(z);
  Eigen::MatrixXd r = qr.matrixQR().topRows(cols).triangularView<Eigen::Upper>();
  if (singular_ratio(r) >= kRankTolerance) return;
  for (Index k = 2; k <= cols; ++k) {
    if (singular_ratio(r.topLeftCorner(k, k)) < kRankTolerance)
      throw Error(ErrorCode::DegenerateColumn,
                  "covariate '" + name_of(k - 2) + "' is collinear with the intercept and earlier covariates");
  }
  throw Error(ErrorCode::DegenerateColumn, "covariate matrix is rank deficient");
}

Dataset::Dataset(Eigen::VectorXd exposure, Eigen::VectorXd outcome, OutcomeKind outcome_kind,
                 std::vector<std::string> covariate_names, Eigen::MatrixXd covariates)
    : Dataset(Unchecked{}, std::move(exposure), std::move(outcome), outcome_kind,
              std::move(covariate_names), std::move(covariates)) {
  check_covariate_rank(covariates_, names_);
}

Dataset::Dataset(Unchecked, Eigen::VectorXd exposure, Eigen::VectorXd outcome, OutcomeKind kind,
                 std::vector<std::string> names, Eigen::MatrixXd covariates)
    : exposure_(std::move(exposure)),
      outcome_(std::move(outcome)),
      outcome_kind_(kind),
      names_(std::move(names)),
      covariates_(std::move(covariates)) {
  validate_basic();
}

void Dataset::validate_basic() const {
  const Index n = exposure_.size();
  if (outcome_.size() != n || covariates_.rows() != n)
    throw Error(ErrorCode::LengthMismatch, "exposure, outcome and covariates must have equal row counts");
  if (covariates_.cols() < 1) throw Error(ErrorCode::InvalidArgument, "at least one covariate is required");
  if (static_cast<Index>(names_.size()) != covariates_.cols())
    throw Error(ErrorCode::LengthMismatch, "covariate name count does not match column count");
  std::set<std::string> unique(names_.begin(), names_.end());
  if (unique.size() != names_.size()) throw Error(ErrorCode::InvalidArgument, "covariate names must be unique");

  bool seen0 = false, seen1 = false;
  for (Index i = 0; i < n; ++i) {
    double a = exposure_(i);
    if (a == 0.0) seen0 = true;
    else if (a == 1.0) seen1 = true;
    else throw Error(ErrorCode::NonBinaryExposure, "exposure value " + format_number(a) + " at row " + std::to_string(i));
  }
  if (!seen0 || !seen1) throw Error(ErrorCode::DegenerateExposure, "exposure must take both values 0 and 1");
  if (!outcome_.allFinite()) throw Error(ErrorCode::IncompleteRow, "outcome contains non-finite values");
  if (!covariates_.allFinite()) throw Error(ErrorCode::IncompleteRow, "covariates contain non-finite values");
  if (outcome_kind_ == OutcomeKind::binary) {
    for (Index i = 0; i < n; ++i)
      if (outcome_(i) != 0.0 && outcome_(i) != 1.0)
        throw Error(ErrorCode::NonBinaryOutcome,
                    "binary outcome value " + format_number(outcome_(i)) + " at row " + std::to_string(i));
  }
}

std::optional<Index> Dataset::find_covariate(const std::string& name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) return std::nullopt;
  return static_cast<Index>(it - names_.begin());
}

Index Dataset::covariate_index(const std::string& name) const {
  if (auto idx = find_covariate(name)) return *idx;
  throw Error(ErrorCode::MissingColumn, "no covariate named '" + name + "'");
}

std::vector<Index> Dataset::covariate_indices(std::span<const std::string> names) const {
  std::vector<Index> out;
  out.reserve(names.size());
  for (const auto& name : names) out.push_back(covariate_index(name));
  return out;
}

Dataset Dataset::select_rows(std::span<const Index> rows) const {
  const Index m = static_cast<Index>(rows.size());
  Eigen::VectorXd a(m), y(m);
  Eigen::MatrixXd l(m, covariates_.cols());
  for (Index i = 0; i < m; ++i) {
    Index r = rows[i];
    if (r < 0 || r >= n()) throw Error(ErrorCode::InvalidArgument, "row index out of range");
    a(i) = exposure_(r);
    y(i) = outcome_(r);
    l.row(i) = covariates_.row(r);
  }
  return Dataset(Unchecked{}, std::move(a), std::move(y), outcome_kind_, names_, std::move(l));
}

Dataset Dataset::select_covariates(std::span<const Index> columns) const {
  Eigen::MatrixXd l(n(), static_cast<Index>(columns.size()));
  std::vector<std::string> names;
  names.reserve(columns.size());
  for (Index k = 0; k < static_cast<Index>(columns.size()); ++k) {
    Index c = columns[k];
    if (c < 0 || c >= num_covariates()) throw Error(ErrorCode::InvalidArgument, "covariate index out of range");
    l.col(k) = covariates_.col(c);
    names.push_back(names_[c]);
  }
  return Dataset(Unchecked{}, exposure_, outcome_, outcome_kind_, std::move(names), std::move(l));
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  std::size_t i = 0;
  auto end_record = [&] {
    record.push_back(std::move(field));
    field.clear();
    // A trailing blank line is not a record.
    if (!(record.size() == 1 && record[0].empty() && !field_started)) records.push_back(std::move(record));
    record.clear();
    field_started = false;
  };
  if (text.size() >= 3 && text.compare(0, 3, "\xEF\xBB\xBF") == 0) i = 3;  // UTF-8 BOM
  for (; i < text.size(); ++i) {
    char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        in_quotes = true;
        field_started = true;
        break;
      case ',':
        record.push_back(std::move(field));
        field.clear();
        field_started = true;
        break;
      case '\r':
        if (i + 1 < text.size() && text[i + 1] == '\n') ++i;
        end_record();
        break;
      case '\n':
        end_record();
        break;
      default:
        field.push_back(c);
        field_started = true;
    }
  }
  if (in_quotes) throw Error(ErrorCode::ParseError, "unterminated quoted field");
  if (field_started || !field.empty() || !record.empty()) end_record();
  return records;
}

LoadResult load_csv(const std::filesystem::path& path, std::span<const ColumnSpec> specs, bool drop_incomplete) {
  auto records = parse_csv(read_file(path));
  if (records.empty()) throw Error(ErrorCode::ParseError, "missing header row in " + path.string());
  const auto& header = records.front();
  std::map<std::string, std::size_t> position;
  for (std::size_t c = 0; c < header.size(); ++c) position.emplace(trim(header[c]), c);

  const ColumnSpec* exposure_spec = nullptr;
  const ColumnSpec* outcome_spec = nullptr;
  std::vector<const ColumnSpec*> covariate_specs;
  for (const auto& spec : specs) {
    if (!position.count(spec.name))
      throw Error(ErrorCode::MissingColumn, "column '" + spec.name + "' not found in " + path.string());
    switch (spec.role) {
      case ColumnRole::exposure:
        if (exposure_spec) throw Error(ErrorCode::InvalidArgument, "more than one exposure column");
        exposure_spec = &spec;
        break;
      case ColumnRole::outcome:
        if (outcome_spec) throw Error(ErrorCode::InvalidArgument, "more than one outcome column");
        outcome_spec = &spec;
        break;
      case ColumnRole::covariate:
        covariate_specs.push_back(&spec);
        break;
      case ColumnRole::ignore:
        break;
    }
  }
  if (!exposure_spec || !outcome_spec)
    throw Error(ErrorCode::InvalidArgument, "exactly one exposure and one outcome column are required");

  std::vector<std::size_t> used;  // exposure, outcome, covariates
  used.push_back(position.at(exposure_spec->name));
  used.push_back(position.at(outcome_spec->name));
  for (auto* spec : covariate_specs) used.push_back(position.at(spec->name));

  std::vector<std::vector<double>> kept;
  std::size_t dropped = 0;
  const std::size_t rows_read = records.size() - 1;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    std::vector<double> values;
    values.reserve(used.size());
    bool complete = true;
    for (std::size_t c : used) {
      std::optional<double> v = c < rec.size() ? parse_number(rec[c]) : std::nullopt;
      if (!v) {
        complete = false;
        break;
      }
      values.push_back(*v);
    }
    if (!complete) {
      if (!drop_incomplete)
        throw Error(ErrorCode::IncompleteRow, "data row " + std::to_string(r) + " has a missing or unparseable cell");
      ++dropped;
      continue;
    }
    kept.push_back(std::move(values));
  }

  const Index n = static_cast<Index>(kept.size());
  const Index j = static_cast<Index>(covariate_specs.size());
  Eigen::VectorXd a(n), y(n);
  Eigen::MatrixXd l(n, j);
  for (Index i = 0; i < n; ++i) {
    a(i) = kept[i][0];
    y(i) = kept[i][1];
    for (Index k = 0; k < j; ++k) l(i, k) = kept[i][k + 2];
  }
  for (Index i = 0; i < n; ++i)
    if (a(i) != 0.0 && a(i) != 1.0)
      throw Error(ErrorCode::NonBinaryExposure,
                  "exposure column '" + exposure_spec->name + "' has value " + format_number(a(i)));
  std::vector<std::string> names;
  for (auto* spec : covariate_specs) names.push_back(spec->name);
  OutcomeKind kind = outcome_spec->outcome_kind.value_or(OutcomeKind::binary);
  return LoadResult{Dataset(std::move(a), std::move(y), kind, std::move(names), std::move(l)), rows_read, dropped};
}

std::string format_number(double value) {
  if (std::isnan(value)) return "NA";
  if (std::isinf(value)) return value > 0 ? "Inf" : "-Inf";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) throw Error(ErrorCode::IoFailure, "number formatting failed");
  return std::string(buf, ptr);
}

std::string render_table(const Table& table) {
  std::string out;
  for (std::size_t c = 0; c < table.columns.size(); ++c) {
    if (c) out.push_back(',');
    out += table.columns[c];
  }
  out.push_back('\n');
  for (const auto& row : table.rows) {
    if (row.size() != table.columns.size())
      throw Error(ErrorCode::LengthMismatch, "table row width does not match header");
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out.push_back(',');
      out += format_number(row[c]);
    }
    out.push_back('\n');
  }
  return out;
}

void write_table(const Table& table, const std::filesystem::path& path) {
  std::string text = render_table(table);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot open " + path.string() + " for writing");
  out << text;
  out.flush();
  if (!out) throw Error(ErrorCode::IoFailure, "write failed for " + path.string());
}

Table read_table(const std::filesystem::path& path) {
  auto records = parse_csv(read_file(path));
  if (records.empty()) throw Error(ErrorCode::ParseError, "missing header row in " + path.string());
  Table table;
  for (const auto& h : records.front()) table.columns.push_back(trim(h));
  for (std::size_t r = 1; r < records.size(); ++r) {
    std::vector<double> row;
    for (const auto& cell : records[r]) {
      std::string t = trim(cell);
      if (t == "Inf") row.push_back(std::numeric_limits<double>::infinity());
      else if (t == "-Inf") row.push_back(-std::numeric_limits<double>::infinity());
      else row.push_back(parse_number(t).value_or(std::numeric_limits<double>::quiet_NaN()));
    }
    if (row.size() != table.columns.size())
      throw Error(ErrorCode::ParseError, "row " + std::to_string(r) + " width does not match header");
    table.rows.push_back(std::move(row));
  }
  return table;
}

}  // namespace confex
