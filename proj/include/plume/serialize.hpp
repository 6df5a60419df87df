#pragma once

#include <json.hpp>

#include "plume/analysis.hpp"
#include "plume/dataset.hpp"
#include "plume/flow.hpp"
#include "plume/indicators.hpp"
#include "plume/stsmoother.hpp"
#include "plume/welltrend.hpp"

// JSON forms of every engine artifact. Doubles are written in shortest
// round-trip form, so a value read back is bit-identical to the one written.
namespace plume::json {

using Json = nlohmann::ordered_json;

Json to_json(const Diagnostic& d);
Json to_json(std::span<const Diagnostic> diags);
Diagnostic diagnostic_from_json(const Json& j);

Json to_json(const Interval& iv, std::size_t index);

Json to_json(const trend::MannKendallResult& mk);
Json to_json(const trend::WellTrendFit& fit);
trend::WellTrendFit trend_from_json(const Json& j);

Json to_json(const flow::FlowField& field, const Dataset& dataset);

Json to_json(const st::BSplineBasis& b);
st::BSplineBasis basis_from_json(const Json& j);
Json to_json(const st::STModel& m);
st::STModel model_from_json(const Json& j);
Json to_json(const st::LambdaSearch& s);
st::LambdaSearch search_from_json(const Json& j);

Json to_json(const ind::IndicatorCell& c);
Json to_json(const ind::IndicatorMatrix& m, const Dataset& dataset);

// Analysis options as accepted by the service and the CLI:
// {granularity, nd_fraction, napl_substitute, aquifer, scale, bandwidth,
//  basis: [mx, my, mt], degree, order, lambda: "auto" | number, lambda_grid,
//  cutoffs: {stable, strong}}. Unknown keys raise ArgumentError.
Json to_json(const AnalysisOptions& o);
AnalysisOptions options_from_json(const Json& j);

// {wells, solutes, intervals} summary of a dataset.
Json summary(const Dataset& dataset);

// Parses "{"S": 5}" or "S:5,T:0.2".
ind::Thresholds parse_thresholds(std::string_view text);

} // namespace plume::json
