#ifndef CREDCAL_IO_HPP
#define CREDCAL_IO_HPP

// Text serialization of the library's data products. Floats in CSV output
// are written with 17 significant digits; JSON uses the shortest string that
// round-trips to the same double.

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "credcal/experiment.hpp"

namespace credcal::io {

using nlohmann::json;

std::string format_double(double v);

/// zeta, lambda_2..lambda_m, omega_1..omega_m
std::vector<std::string> theta_column_names(Index m);

/// CSV layout: "m,dof" header, one line with the two values, then m rows.
std::string data_to_csv(const CrossProductData& data);
CrossProductData data_from_csv(const std::string& text);
json data_to_json(const CrossProductData& data);
CrossProductData data_from_json(const json& j);

/// Picks the format from the extension (.json, otherwise CSV) and validates.
CrossProductData read_data(const std::filesystem::path& path);
void write_data(const std::filesystem::path& path, const CrossProductData& data);

json map_fit_to_json(const MapFit& fit);

/// One row per draw: theta columns then `chain`.
std::string draws_to_csv(const PosteriorDraws& draws);
json diagnostics_to_json(const PosteriorDraws& draws);

/// Columns nominal_alpha,xi,calibrated_alpha.
std::string curve_to_csv(const CalibrationCurve& curve);
json curve_to_json(const CalibrationCurve& curve, StatisticKind kind);

std::string trace_to_csv(const CalibrationResult& result);

std::string records_to_csv(const std::vector<ReplicationRecord>& records,
                           const std::vector<StatisticKind>& kinds);
std::string edf_to_csv(const EdfSummary& summary);

std::string thetas_to_csv(const std::vector<ThetaVector>& thetas);

json tuning_to_json(const TuningConstants& t);
TuningConstants tuning_from_json(const json& j);
json mcmc_to_json(const McmcConfig& c);
McmcConfig mcmc_from_json(const json& j);
json prior_to_json(const PriorSpec& p);
PriorSpec prior_from_json(const json& j);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace credcal::io

#endif  // CREDCAL_IO_HPP
