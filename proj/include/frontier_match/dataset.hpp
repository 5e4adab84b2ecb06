#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "frontier_match/csv.hpp"
#include "frontier_match/errors.hpp"

namespace frontier_match::dataset {

// DB = design-and-build (the treated group), DBB = design-bid-build.
enum class Group { db, dbb };

enum class Authority { municipality, province, region, public_company, autonomous, central };

inline const char* to_string(Group g) { return g == Group::db ? "DB" : "DBB"; }

inline const char* to_string(Authority a) {
  switch (a) {
    case Authority::municipality: return "municipality";
    case Authority::province: return "province";
    case Authority::region: return "region";
    case Authority::public_company: return "public_company";
    case Authority::autonomous: return "autonomous";
    case Authority::central: return "central";
  }
  return "?";
}

// One public-works contract. Money in thousand currency units, time in days.
struct ContractRecord {
  std::string contract_id;
  Group group = Group::dbb;
  double reserve_price = 0.0;
  bool new_build = false;
  bool negotiation = false;
  Authority authority = Authority::municipality;
  double actual_cost = 0.0;
  double actual_time = 0.0;
  double agreed_cost = 0.0;
  double planned_time = 0.0;
  std::optional<int> award_year;

  bool operator==(const ContractRecord&) const = default;
};

inline constexpr const char* k_csv_header =
    "contract_id,group,reserve_price,new_build,negotiation,authority,"
    "actual_cost,actual_time,agreed_cost,planned_time,award_year";

namespace detail {

inline Group parse_group(const std::string& s, int line, const char* col) {
  if (s == "DB") return Group::db;
  if (s == "DBB") return Group::dbb;
  throw validation_error("line " + std::to_string(line) + ", column " + col +
                         ": expected DB or DBB, got '" + s + "'");
}

inline Authority parse_authority(const std::string& s, int line, const char* col) {
  if (s == "municipality") return Authority::municipality;
  if (s == "province") return Authority::province;
  if (s == "region") return Authority::region;
  if (s == "public_company") return Authority::public_company;
  if (s == "autonomous") return Authority::autonomous;
  if (s == "central") return Authority::central;
  throw validation_error("line " + std::to_string(line) + ", column " + col +
                         ": unknown authority '" + s + "'");
}

inline bool parse_bool(const std::string& s, int line, const char* col) {
  if (s == "0" || s == "false") return false;
  if (s == "1" || s == "true") return true;
  throw validation_error("line " + std::to_string(line) + ", column " + col +
                         ": expected 0/1/true/false, got '" + s + "'");
}

inline double parse_double(const std::string& s, int line, const char* col) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != s.size() || s.empty())
    throw validation_error("line " + std::to_string(line) + ", column " + col +
                           ": expected a number, got '" + s + "'");
  return v;
}

inline void check_positive(double v, const std::string& id, const char* field) {
  if (!(v > 0.0) || !std::isfinite(v))
    throw validation_error("record '" + id + "': " + field +
                           " must be strictly positive and finite");
}

}  // namespace detail

// Parse the dataset CSV. Header must match the canonical schema (award_year
// may be omitted as a whole column). Errors name the offending line/column.
inline std::vector<ContractRecord> parse_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line))
    throw validation_error("empty input: missing header row");
  const auto header = csv::split(line);
  const auto expected = csv::split(k_csv_header);
  const bool with_year = header.size() == expected.size();
  const std::size_t ncols = with_year ? expected.size() : expected.size() - 1;
  if (header.size() != ncols)
    throw validation_error("bad header: expected '" + std::string(k_csv_header) +
                           "' (award_year optional)");
  for (std::size_t i = 0; i < ncols; ++i)
    if (header[i] != expected[i])
      throw validation_error("bad header: column " + std::to_string(i + 1) +
                             " is '" + header[i] + "', expected '" + expected[i] + "'");

  std::vector<ContractRecord> records;
  std::unordered_set<std::string> seen_ids;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto f = csv::split(line);
    if (f.size() != ncols)
      throw validation_error("line " + std::to_string(lineno) + ": expected " +
                             std::to_string(ncols) + " fields, got " +
                             std::to_string(f.size()));
    ContractRecord r;
    r.contract_id = f[0];
    if (r.contract_id.empty())
      throw validation_error("line " + std::to_string(lineno) + ": empty contract_id");
    if (!seen_ids.insert(r.contract_id).second)
      throw validation_error("line " + std::to_string(lineno) +
                             ": duplicate contract_id '" + r.contract_id + "'");
    r.group = detail::parse_group(f[1], lineno, "group");
    r.reserve_price = detail::parse_double(f[2], lineno, "reserve_price");
    r.new_build = detail::parse_bool(f[3], lineno, "new_build");
    r.negotiation = detail::parse_bool(f[4], lineno, "negotiation");
    r.authority = detail::parse_authority(f[5], lineno, "authority");
    r.actual_cost = detail::parse_double(f[6], lineno, "actual_cost");
    r.actual_time = detail::parse_double(f[7], lineno, "actual_time");
    r.agreed_cost = detail::parse_double(f[8], lineno, "agreed_cost");
    r.planned_time = detail::parse_double(f[9], lineno, "planned_time");
    if (with_year && !f[10].empty())
      r.award_year = static_cast<int>(detail::parse_double(f[10], lineno, "award_year"));

    detail::check_positive(r.reserve_price, r.contract_id, "reserve_price");
    detail::check_positive(r.actual_cost, r.contract_id, "actual_cost");
    detail::check_positive(r.actual_time, r.contract_id, "actual_time");
    detail::check_positive(r.agreed_cost, r.contract_id, "agreed_cost");
    detail::check_positive(r.planned_time, r.contract_id, "planned_time");
    records.push_back(std::move(r));
  }
  return records;
}

inline std::vector<ContractRecord> parse_csv_string(const std::string& text) {
  std::istringstream in(text);
  return parse_csv(in);
}

inline void write_csv(std::ostream& out, const std::vector<ContractRecord>& records) {
  out << k_csv_header << '\n';
  for (const auto& r : records) {
    out << r.contract_id << ',' << to_string(r.group) << ',' << csv::fmt(r.reserve_price)
        << ',' << (r.new_build ? 1 : 0) << ',' << (r.negotiation ? 1 : 0) << ','
        << to_string(r.authority) << ',' << csv::fmt(r.actual_cost) << ','
        << csv::fmt(r.actual_time) << ',' << csv::fmt(r.agreed_cost) << ','
        << csv::fmt(r.planned_time) << ',';
    if (r.award_year) out << *r.award_year;
    out << '\n';
  }
}

inline constexpr std::array<const char*, 9> k_design_columns = {
    "constant",       "reserve_price", "new_build",
    "negotiation",    "province",      "region",
    "public_company", "autonomous",    "central_gov"};

// Covariate matrix for the propensity model. Column 0 is the constant;
// municipality is the reference level for the authority dummies.
struct DesignMatrix {
  Eigen::MatrixXd covariates;            // n x p, row per record in input order
  Eigen::VectorXd treatment;             // 1 = DB
  std::vector<std::string> ids;          // aligned with rows
  std::vector<std::string> column_names; // aligned with columns

  Eigen::Index rows() const { return covariates.rows(); }
  Eigen::Index cols() const { return covariates.cols(); }

  const std::string& column_name(Eigen::Index j) const {
    return column_names[static_cast<std::size_t>(j)];
  }
};

inline DesignMatrix build_design(const std::vector<ContractRecord>& records) {
  if (records.empty()) throw validation_error("build_design: empty record sequence");
  const Eigen::Index n = static_cast<Eigen::Index>(records.size());
  DesignMatrix d;
  d.covariates.setZero(n, 9);
  d.treatment.setZero(n);
  d.ids.reserve(records.size());
  d.column_names.assign(k_design_columns.begin(), k_design_columns.end());
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = records[static_cast<std::size_t>(i)];
    d.covariates(i, 0) = 1.0;
    d.covariates(i, 1) = r.reserve_price;
    d.covariates(i, 2) = r.new_build ? 1.0 : 0.0;
    d.covariates(i, 3) = r.negotiation ? 1.0 : 0.0;
    switch (r.authority) {
      case Authority::municipality: break;  // reference level, all dummies zero
      case Authority::province: d.covariates(i, 4) = 1.0; break;
      case Authority::region: d.covariates(i, 5) = 1.0; break;
      case Authority::public_company: d.covariates(i, 6) = 1.0; break;
      case Authority::autonomous: d.covariates(i, 7) = 1.0; break;
      case Authority::central: d.covariates(i, 8) = 1.0; break;
    }
    d.treatment(i) = r.group == Group::db ? 1.0 : 0.0;
    d.ids.push_back(r.contract_id);
  }
  return d;
}

}  // namespace frontier_match::dataset
