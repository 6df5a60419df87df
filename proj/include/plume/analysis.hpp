#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "plume/dataset.hpp"
#include "plume/flow.hpp"
#include "plume/indicators.hpp"
#include "plume/stsmoother.hpp"
#include "plume/welltrend.hpp"

namespace plume {

struct AnalysisOptions {
    DatasetOptions dataset;
    trend::TrendOptions trend;
    st::SmootherOptions smoother;
    ind::Cutoffs cutoffs;
};

struct TrendEntry {
    std::optional<trend::WellTrendFit> fit;
    std::string failure;  // set when fit is empty
    bool all_censored = false;
};

struct ModelEntry {
    std::optional<st::STModel> model;
    st::LambdaSearch search;
    std::string failure;
    std::vector<std::string> warnings;
};

// A dataset plus everything fitted on it. Built once; read-only afterwards.
class Analysis {
public:
    Dataset dataset;
    AnalysisOptions options;
    std::optional<flow::Triangulation> triangulation;
    std::string triangulation_error;
    std::map<std::pair<std::string, std::string>, TrendEntry> trends;  // (well, solute)
    std::map<std::string, ModelEntry> models;                          // solute
    std::vector<Diagnostic> diagnostics;

    const TrendEntry* trend_entry(const std::string& well, const std::string& solute) const;
    const trend::WellTrendFit* trend(const std::string& well, const std::string& solute) const;
    const st::STModel* model(const std::string& solute) const;
    flow::FlowField flow(std::size_t interval) const;
};

// Fits every (well, solute) trend smoother and one spatiotemporal model per
// solute. Per-well fits run in parallel; failures are recorded, not thrown.
Analysis run_analysis(Dataset dataset, const AnalysisOptions& options);

// Directory layout: dataset/{monitoring.csv,wells.csv,overlays.json}, analysis.json.
void save_analysis(const Analysis& analysis, const std::filesystem::path& dir);
// Reloads without refitting.
Analysis load_analysis(const std::filesystem::path& dir);

} // namespace plume
