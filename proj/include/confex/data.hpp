#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace confex {

using Index = Eigen::Index;

enum class OutcomeKind { binary, continuous };
enum class ColumnRole { exposure, outcome, covariate, ignore };

struct ColumnSpec {
  std::string name;
  ColumnRole role = ColumnRole::covariate;
  std::optional<OutcomeKind> outcome_kind;  // outcome role only; defaults to binary
};

// Observation table: binary exposure, outcome and J named covariate columns.
// The intercept is implicit. Immutable once constructed.
class Dataset {
 public:
  // Validates every invariant (both exposure levels present, binary outcome in
  // {0,1}, J >= 1, unique names, finite values, full column rank with the
  // intercept). Throws confex::Error on violation.
  Dataset(Eigen::VectorXd exposure, Eigen::VectorXd outcome, OutcomeKind outcome_kind,
          std::vector<std::string> covariate_names, Eigen::MatrixXd covariates);

  Index n() const { return exposure_.size(); }
  Index num_covariates() const { return covariates_.cols(); }

  const Eigen::VectorXd& exposure() const { return exposure_; }
  const Eigen::VectorXd& outcome() const { return outcome_; }
  OutcomeKind outcome_kind() const { return outcome_kind_; }
  const std::vector<std::string>& covariate_names() const { return names_; }
  const Eigen::MatrixXd& covariates() const { return covariates_; }

  std::optional<Index> find_covariate(const std::string& name) const;
  // Throws MissingColumn.
  Index covariate_index(const std::string& name) const;
  std::vector<Index> covariate_indices(std::span<const std::string> names) const;

  // Row subset in the given order. Skips the rank check (row subsets of a valid
  // table are re-validated only for the cheap invariants).
  Dataset select_rows(std::span<const Index> rows) const;
  // Keeps the listed covariates, in the listed order.
  Dataset select_covariates(std::span<const Index> columns) const;

 private:
  struct Unchecked {};
  Dataset(Unchecked, Eigen::VectorXd exposure, Eigen::VectorXd outcome, OutcomeKind kind,
          std::vector<std::string> names, Eigen::MatrixXd covariates);
  void validate_basic() const;

  Eigen::VectorXd exposure_;
  Eigen::VectorXd outcome_;
  OutcomeKind outcome_kind_;
  std::vector<std::string> names_;
  Eigen::MatrixXd covariates_;
};

// Throws DegenerateColumn naming the first covariate that is constant or lies in
// the span of the intercept and earlier columns. Uses the singular value ratio
// of the column-scaled design [1, L] at tolerance 1e-10.
void check_covariate_rank(const Eigen::MatrixXd& covariates, std::span<const std::string> names);

struct LoadResult {
  Dataset data;
  std::size_t rows_read = 0;
  std::size_t rows_dropped = 0;
};

// Reads a headered CSV. Cells that are empty, "NA" or "NaN" are missing, as are
// cells that fail numeric parsing. With drop_incomplete, rows with a missing
// cell in any non-ignored column are removed; otherwise they raise IncompleteRow.
LoadResult load_csv(const std::filesystem::path& path, std::span<const ColumnSpec> specs,
                    bool drop_incomplete);

// Plain numeric table, used for every CSV the engine writes.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

// Shortest round-trip decimal; NaN renders as "NA", infinities as "Inf"/"-Inf".
std::string format_number(double value);

void write_table(const Table& table, const std::filesystem::path& path);
std::string render_table(const Table& table);
// Numeric reader for tables produced by write_table (missing tokens become NaN).
Table read_table(const std::filesystem::path& path);

// RFC-4180 field splitting: quoted fields, doubled quotes, CRLF line ends.
std::vector<std::vector<std::string>> parse_csv(const std::string& text);

}  // namespace confex
