#include "plume/service.hpp"

#include <condition_variable>
#include <deque>
#include <map>
#include <mutex>
#include <random>
#include <thread>

#include "plume/errors.hpp"
#include "plume/export.hpp"
#include "plume/serialize.hpp"

// After Eigen: httplib pulls in <resolv.h>, which defines a `_res` macro.
#include <httplib.h>
#include <openssl/evp.h>

namespace plume::service {

using json::Json;

namespace {

enum class Status { Queued, Running, Done, Failed };

std::string_view to_string(Status s) {
    switch (s) {
    case Status::Queued: return "queued";
    case Status::Running: return "running";
    case Status::Done: return "done";
    case Status::Failed: return "failed";
    }
    return "failed";
}

Status parse_status(const std::string& s) {
    if (s == "done") return Status::Done;
    if (s == "failed") return Status::Failed;
    if (s == "running") return Status::Running;
    return Status::Queued;
}

struct Job {
    std::string id;
    std::string dataset_id;
    Json options_json;
    AnalysisOptions options;
    std::unique_ptr<Dataset> dataset;  // consumed by the worker

    // Guarded by Impl::mu.
    Status status = Status::Queued;
    std::vector<Diagnostic> diagnostics;
    std::string error;
    std::shared_ptr<const Analysis> analysis;

    std::mutex cache_mu;
    std::map<std::string, std::shared_ptr<const exports::FrameSequence>> frames;
};

struct HttpError {
    int status;
    std::string code;
    std::string message;
    Json extra = nullptr;
};

bool valid_id(const std::string& s) {
    if (s.empty() || s.size() > 64) return false;
    for (char c : s)
        if (!std::isxdigit(static_cast<unsigned char>(c))) return false;
    return true;
}

std::string sha256_hex(std::initializer_list<std::string_view> parts) {
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
    for (auto p : parts) {
        const std::string len = std::to_string(p.size()) + ":";
        EVP_DigestUpdate(ctx, len.data(), len.size());
        EVP_DigestUpdate(ctx, p.data(), p.size());
    }
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int n = 0;
    EVP_DigestFinal_ex(ctx, md, &n);
    EVP_MD_CTX_free(ctx);
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned i = 0; i < n; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 15];
    }
    return out;
}

std::string new_id() {
    static std::mutex mu;
    static std::mt19937_64 rng{std::random_device{}()};
    std::lock_guard lock(mu);
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(rng()));
    return buf;
}

void send_json(httplib::Response& res, int status, const Json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, const HttpError& e) {
    Json body{{"code", e.code}, {"message", e.message}};
    if (!e.extra.is_null()) body["diagnostics"] = e.extra;
    send_json(res, e.status, body);
}

HttpError map_error(const Error& e) {
    const auto& code = e.code();
    if (dynamic_cast<const NotFoundError*>(&e) || code == "INTERVAL_OUT_OF_RANGE") return {404, code, e.what()};
    if (code == "INVALID_ARGUMENT") return {400, "BAD_REQUEST", e.what()};
    if (code == "FIT_FAILED" || code == "EXTRAPOLATION" || code == "INSUFFICIENT_DATA") return {422, code, e.what()};
    return {500, code, e.what()};
}

std::string param(const httplib::Request& req, const std::string& key, const std::string& fallback = {}) {
    return req.has_param(key) ? req.get_param_value(key) : fallback;
}

long int_param(const httplib::Request& req, const std::string& key, long fallback, long lo, long hi) {
    if (!req.has_param(key)) return fallback;
    const auto s = req.get_param_value(key);
    char* end = nullptr;
    long v = std::strtol(s.c_str(), &end, 10);
    if (s.empty() || *end || v < lo || v > hi) {
        throw HttpError{400, "BAD_REQUEST",
                        key + " must be an integer in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]"};
    }
    return v;
}

std::size_t interval_index(const Analysis& a, const std::string& text) {
    char* end = nullptr;
    long k = std::strtol(text.c_str(), &end, 10);
    const auto n = a.dataset.intervals().size();
    if (text.empty() || *end || k < 0 || static_cast<std::size_t>(k) >= n) {
        throw HttpError{404, "INTERVAL_OUT_OF_RANGE",
                        "interval '" + text + "' out of range [0, " + std::to_string(n - 1) + "]"};
    }
    return static_cast<std::size_t>(k);
}

std::string require_solute(const httplib::Request& req, const Analysis& a) {
    if (!req.has_param("solute")) throw HttpError{400, "BAD_REQUEST", "query parameter 'solute' is required"};
    auto s = req.get_param_value("solute");
    if (!a.dataset.has_solute(s)) throw HttpError{404, "SOLUTE_NOT_FOUND", "unknown solute '" + s + "'"};
    return s;
}

exports::SliceOptions slice_options(const httplib::Request& req) {
    exports::SliceOptions o;
    o.nx = static_cast<int>(int_param(req, "nx", 50, 2, 500));
    o.ny = static_cast<int>(int_param(req, "ny", 50, 2, 500));
    o.mask_hull = int_param(req, "mask", 1, 0, 1) == 1;
    return o;
}

ind::Cutoffs cutoffs(const httplib::Request& req, const ind::Cutoffs& base) {
    ind::Cutoffs c = base;
    auto get = [&](const char* key, double& out) {
        if (!req.has_param(key)) return;
        const auto s = req.get_param_value(key);
        char* end = nullptr;
        double v = std::strtod(s.c_str(), &end);
        if (s.empty() || *end) throw HttpError{400, "BAD_REQUEST", std::string(key) + " must be a number"};
        out = v;
    };
    get("stable", c.stable);
    get("strong", c.strong);
    try {
        c.check();
    } catch (const Error& e) {
        throw HttpError{400, "BAD_REQUEST", e.what()};
    }
    return c;
}

ind::Thresholds thresholds(const httplib::Request& req) {
    try {
        return json::parse_thresholds(param(req, "thresholds"));
    } catch (const Error& e) {
        throw HttpError{400, "BAD_REQUEST", e.what()};
    }
}

} // namespace

struct Server::Impl {
    Config config;
    httplib::Server http;
    std::thread listener;

    std::mutex mu;
    std::condition_variable cv;
    std::map<std::string, std::shared_ptr<Job>> jobs;
    std::deque<std::shared_ptr<Job>> queue;
    std::vector<std::thread> workers;
    bool stopping = false;

    explicit Impl(Config c) : config(std::move(c)) {
        std::filesystem::create_directories(config.data_dir / "datasets");
        std::filesystem::create_directories(config.data_dir / "analyses");
        http.set_payload_max_length(config.max_upload);
        http.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
        routes();
        for (int i = 0; i < config.workers; ++i) workers.emplace_back([this] { work(); });
    }

    ~Impl() {
        {
            std::lock_guard lock(mu);
            stopping = true;
        }
        cv.notify_all();
        http.stop();
        if (listener.joinable()) listener.join();
        for (auto& w : workers) w.join();
    }

    std::filesystem::path dataset_dir(const std::string& id) const { return config.data_dir / "datasets" / id; }
    std::filesystem::path analysis_dir(const std::string& id) const { return config.data_dir / "analyses" / id; }

    void persist_job(const Job& job, Status status, std::span<const Diagnostic> diags, const std::string& error) {
        Json j{{"id", job.id},
               {"dataset_id", job.dataset_id},
               {"options", job.options_json},
               {"status", to_string(status)},
               {"diagnostics", json::to_json(diags)}};
        if (!error.empty()) j["error"] = error;
        write_file(analysis_dir(job.id) / "job.json", j.dump(1));
    }

    void work() {
        for (;;) {
            std::shared_ptr<Job> job;
            {
                std::unique_lock lock(mu);
                cv.wait(lock, [&] { return stopping || !queue.empty(); });
                if (stopping) return;
                job = queue.front();
                queue.pop_front();
                job->status = Status::Running;
            }
            std::shared_ptr<const Analysis> result;
            std::string error;
            std::vector<Diagnostic> diags;
            try {
                auto a = std::make_shared<Analysis>(run_analysis(std::move(*job->dataset), job->options));
                job->dataset.reset();
                save_analysis(*a, analysis_dir(job->id));
                diags = a->diagnostics;
                result = std::move(a);
            } catch (const std::exception& e) {
                error = e.what();
            }
            const Status st = result ? Status::Done : Status::Failed;
            try {
                persist_job(*job, st, diags, error);
            } catch (const std::exception&) {
            }
            std::lock_guard lock(mu);
            job->analysis = std::move(result);
            job->diagnostics = std::move(diags);
            job->error = std::move(error);
            job->status = st;
        }
    }

    // Looks a job up in memory, then on disk.
    std::shared_ptr<Job> find_job(const std::string& id) {
        if (!valid_id(id)) throw HttpError{404, "ANALYSIS_NOT_FOUND", "unknown analysis '" + id + "'"};
        {
            std::lock_guard lock(mu);
            if (auto it = jobs.find(id); it != jobs.end()) return it->second;
        }
        const auto dir = analysis_dir(id);
        if (!std::filesystem::exists(dir / "job.json")) {
            throw HttpError{404, "ANALYSIS_NOT_FOUND", "unknown analysis '" + id + "'"};
        }
        auto job = std::make_shared<Job>();
        const Json j = Json::parse(read_file(dir / "job.json"));
        job->id = id;
        job->dataset_id = j.at("dataset_id").get<std::string>();
        job->options_json = j.at("options");
        job->status = parse_status(j.at("status").get<std::string>());
        for (const auto& d : j.at("diagnostics")) job->diagnostics.push_back(json::diagnostic_from_json(d));
        job->error = j.value("error", std::string{});
        if (job->status == Status::Done) {
            job->analysis = std::make_shared<const Analysis>(load_analysis(dir));
        } else if (job->status != Status::Failed) {
            job->status = Status::Failed;
            job->error = "analysis interrupted by a service restart";
        }
        std::lock_guard lock(mu);
        return jobs.emplace(id, std::move(job)).first->second;
    }

    std::shared_ptr<const Analysis> done_analysis(const std::string& id) {
        auto job = find_job(id);
        std::lock_guard lock(mu);
        if (job->status == Status::Done) return job->analysis;
        if (job->status == Status::Failed) {
            throw HttpError{409, "JOB_FAILED", "analysis " + id + " failed: " + job->error};
        }
        throw HttpError{409, "JOB_NOT_DONE", "analysis " + id + " is " + std::string(to_string(job->status))};
    }

    template <class F>
    httplib::Server::Handler guarded(F f) {
        return [this, f](const httplib::Request& req, httplib::Response& res) {
            try {
                f(req, res);
            } catch (const HttpError& e) {
                send_error(res, e);
            } catch (const DatasetError& e) {
                send_error(res, {422, "VALIDATION_FAILED", e.what(), json::to_json(e.diagnostics())});
            } catch (const Error& e) {
                send_error(res, map_error(e));
            } catch (const nlohmann::json::exception& e) {
                send_error(res, {400, "BAD_REQUEST", e.what()});
            } catch (const std::exception& e) {
                send_error(res, {500, "INTERNAL", e.what()});
            }
        };
    }

    void routes() {
        http.Get("/health", [](const httplib::Request&, httplib::Response& res) {
            send_json(res, 200, {{"status", "ok"}});
        });

        http.Post("/datasets", guarded([this](const httplib::Request& req, httplib::Response& res) {
            if (!req.is_multipart_form_data()) {
                throw HttpError{400, "BAD_REQUEST", "expected multipart/form-data with monitoring and wells files"};
            }
            auto field = [&](const char* name, const char* alt) -> std::optional<std::string> {
                if (req.has_file(name)) return req.get_file_value(name).content;
                if (req.has_file(alt)) return req.get_file_value(alt).content;
                return std::nullopt;
            };
            auto mon = field("monitoring", "monitoring.csv");
            auto wells = field("wells", "wells.csv");
            auto overlays = field("overlays", "overlays.json");
            if (!mon || !wells) throw HttpError{400, "BAD_REQUEST", "monitoring and wells files are required"};

            RawTables tables;
            try {
                tables = parse_tables(*mon, *wells,
                                      overlays ? std::optional<std::string_view>(*overlays) : std::nullopt);
            } catch (const Error& e) {
                throw HttpError{422, "VALIDATION_FAILED", e.what()};
            }
            auto diags = validate(tables);
            if (has_errors(diags)) {
                throw HttpError{422, "VALIDATION_FAILED", "monitoring data failed validation", json::to_json(diags)};
            }
            const auto id = sha256_hex({*mon, *wells, overlays ? std::string_view(*overlays) : std::string_view{}});
            const auto dir = dataset_dir(id);
            if (!std::filesystem::exists(dir / "wells.csv")) {
                const auto tmp = config.data_dir / "datasets" / (id + ".tmp-" + new_id());
                std::filesystem::create_directories(tmp);
                write_file(tmp / "monitoring.csv", *mon);
                if (overlays) write_file(tmp / "overlays.json", *overlays);
                write_file(tmp / "wells.csv", *wells);
                std::error_code ec;
                std::filesystem::rename(tmp, dir, ec);
                if (ec) std::filesystem::remove_all(tmp);
            }
            send_json(res, 201, {{"id", id}, {"diagnostics", json::to_json(diags)}});
        }));

        http.Get(R"(/datasets/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
            const auto id = req.matches[1].str();
            if (!valid_id(id) || !std::filesystem::exists(dataset_dir(id) / "wells.csv")) {
                throw HttpError{404, "DATASET_NOT_FOUND", "unknown dataset '" + id + "'"};
            }
            auto ds = load_dataset(dataset_dir(id));
            Json j = json::summary(ds);
            j["id"] = id;
            j["diagnostics"] = json::to_json(ds.diagnostics());
            send_json(res, 200, j);
        }));

        http.Post(R"(/datasets/([^/]+)/analyses)", guarded([this](const httplib::Request& req, httplib::Response& res) {
            const auto id = req.matches[1].str();
            if (!valid_id(id) || !std::filesystem::exists(dataset_dir(id) / "wells.csv")) {
                throw HttpError{404, "DATASET_NOT_FOUND", "unknown dataset '" + id + "'"};
            }
            Json opts = Json::object();
            if (!req.body.empty()) {
                try {
                    opts = Json::parse(req.body);
                } catch (const nlohmann::json::exception& e) {
                    throw HttpError{422, "INVALID_OPTIONS", std::string("options are not valid JSON: ") + e.what()};
                }
            }
            auto job = std::make_shared<Job>();
            try {
                job->options = json::options_from_json(opts);
                job->dataset = std::make_unique<Dataset>(Dataset::build(read_tables(dataset_dir(id)), job->options.dataset));
            } catch (const DatasetError& e) {
                throw HttpError{422, "VALIDATION_FAILED", e.what(), json::to_json(e.diagnostics())};
            } catch (const Error& e) {
                throw HttpError{422, "INVALID_OPTIONS", e.what()};
            }
            job->options.dataset = job->dataset->options();
            job->options_json = json::to_json(job->options);
            job->dataset_id = id;
            job->id = new_id();
            job->diagnostics = job->dataset->diagnostics();
            std::filesystem::create_directories(analysis_dir(job->id));
            persist_job(*job, Status::Queued, job->diagnostics, "");
            {
                std::lock_guard lock(mu);
                jobs.emplace(job->id, job);
                queue.push_back(job);
            }
            cv.notify_one();
            send_json(res, 202, {{"id", job->id}, {"status", "queued"}, {"dataset_id", id}});
        }));

        http.Get(R"(/analyses/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
            auto job = find_job(req.matches[1].str());
            Json j;
            std::shared_ptr<const Analysis> a;
            {
                std::lock_guard lock(mu);
                j["id"] = job->id;
                j["dataset_id"] = job->dataset_id;
                j["status"] = to_string(job->status);
                j["options"] = job->options_json;
                j["diagnostics"] = json::to_json(job->diagnostics);
                if (!job->error.empty()) j["error"] = job->error;
                a = job->analysis;
            }
            if (a) {
                j["summary"] = json::summary(a->dataset);
                Json models = Json::array();
                for (const auto& s : a->dataset.solutes()) {
                    const auto& m = a->models.at(s);
                    Json o{{"solute", s}};
                    if (m.model) {
                        o["lambda"] = m.model->lambda;
                        o["edf"] = m.model->edf;
                        o["sigma2"] = m.model->sigma2;
                    } else {
                        o["failure"] = m.failure;
                    }
                    models.push_back(std::move(o));
                }
                j["models"] = std::move(models);
                j["flow_available"] = a->triangulation.has_value();
            }
            send_json(res, 200, j);
        }));

        http.Get(R"(/analyses/([^/]+)/wells/([^/]+)/trend)",
                 guarded([this](const httplib::Request& req, httplib::Response& res) {
                     auto a = done_analysis(req.matches[1].str());
                     const auto well = req.matches[2].str();
                     if (!a->dataset.find_well(well)) throw HttpError{404, "WELL_NOT_FOUND", "unknown well '" + well + "'"};
                     const auto solute = require_solute(req, *a);
                     const auto* e = a->trend_entry(well, solute);
                     if (e && e->fit) {
                         send_json(res, 200, json::to_json(*e->fit));
                     } else {
                         send_json(res, 200,
                                   {{"well_id", well},
                                    {"solute", solute},
                                    {"failure", e && !e->failure.empty() ? e->failure : "no samples"}});
                     }
                 }));

        http.Get(R"(/analyses/([^/]+)/wells/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
            auto a = done_analysis(req.matches[1].str());
            const bool gw = int_param(req, "gw", 1, 0, 1) == 1;
            send_json(res, 200, exports::to_json(exports::well_bundle(*a, req.matches[2].str(), gw)));
        }));

        http.Get(R"(/analyses/([^/]+)/report)", guarded([this](const httplib::Request& req, httplib::Response& res) {
            auto a = done_analysis(req.matches[1].str());
            const bool gw = int_param(req, "gw", 1, 0, 1) == 1;
            auto report = exports::well_report(*a, gw);
            send_json(res, 200, exports::to_json(report));
        }));

        http.Get(R"(/analyses/([^/]+)/models/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
            auto a = done_analysis(req.matches[1].str());
            const auto solute = req.matches[2].str();
            if (!a->dataset.has_solute(solute)) throw HttpError{404, "SOLUTE_NOT_FOUND", "unknown solute '" + solute + "'"};
            const auto& m = a->models.at(solute);
            Json j{{"solute", solute}};
            if (m.model)
                j["model"] = json::to_json(*m.model);
            else
                j["failure"] = m.failure;
            j["search"] = json::to_json(m.search);
            j["warnings"] = m.warnings;
            send_json(res, 200, j);
        }));

        http.Get(R"(/analyses/([^/]+)/slices/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
            auto a = done_analysis(req.matches[1].str());
            const auto k = interval_index(*a, req.matches[2].str());
            const auto solute = require_solute(req, *a);
            auto grid = exports::slice_grid(*a, solute, k, slice_options(req));
            if (param(req, "format") == "svg") {
                res.set_content(exports::render_svg(grid, a->dataset.overlays()), "image/svg+xml");
                return;
            }
            send_json(res, 200, exports::to_json(grid));
        }));

        http.Get(R"(/analyses/([^/]+)/flow/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
            auto a = done_analysis(req.matches[1].str());
            const auto k = interval_index(*a, req.matches[2].str());
            Json j = json::to_json(a->flow(k), a->dataset);
            if (!a->triangulation) j["error"] = a->triangulation_error;
            send_json(res, 200, j);
        }));

        http.Get(R"(/analyses/([^/]+)/indicators)", guarded([this](const httplib::Request& req, httplib::Response& res) {
            auto a = done_analysis(req.matches[1].str());
            const auto n = a->dataset.intervals().size();
            const auto k = req.has_param("k") ? interval_index(*a, req.get_param_value("k")) : n - 1;
            ind::Mode mode;
            try {
                mode = ind::parse_mode(param(req, "mode", "trend"));
            } catch (const Error& e) {
                throw HttpError{400, "BAD_REQUEST", e.what()};
            }
            auto m = ind::indicator_matrix(*a, k, mode, thresholds(req), cutoffs(req, a->options.cutoffs));
            if (param(req, "format") == "svg") {
                res.set_content(exports::render_svg(m), "image/svg+xml");
                return;
            }
            send_json(res, 200, json::to_json(m, a->dataset));
        }));

        http.Get(R"(/analyses/([^/]+)/frames)", guarded([this](const httplib::Request& req, httplib::Response& res) {
            const auto id = req.matches[1].str();
            auto a = done_analysis(id);
            auto job = find_job(id);
            const auto solute = require_solute(req, *a);
            const auto opts = slice_options(req);
            const auto n = static_cast<long>(a->dataset.intervals().size());
            const auto offset = static_cast<std::size_t>(int_param(req, "offset", 0, 0, n));
            const auto limit = static_cast<std::size_t>(int_param(req, "limit", n, 1, n));
            const std::string key = solute + "|" + std::to_string(opts.nx) + "|" + std::to_string(opts.ny) + "|" +
                                    std::to_string(opts.mask_hull);
            std::shared_ptr<const exports::FrameSequence> seq;
            {
                std::lock_guard lock(job->cache_mu);
                if (auto it = job->frames.find(key); it != job->frames.end()) seq = it->second;
            }
            if (!seq) {
                seq = std::make_shared<const exports::FrameSequence>(exports::frame_sequence(*a, solute, opts));
                std::lock_guard lock(job->cache_mu);
                job->frames.emplace(key, seq);
            }
            send_json(res, 200, exports::to_json(*seq, offset, limit));
        }));

        http.Get(R"(/analyses/([^/]+)/snapshot)", guarded([this](const httplib::Request& req, httplib::Response& res) {
            auto a = done_analysis(req.matches[1].str());
            auto snap = exports::latest_snapshot(*a, thresholds(req), cutoffs(req, a->options.cutoffs), slice_options(req));
            send_json(res, 200, exports::to_json(snap, a->dataset));
        }));
    }
};

Server::Server(Config config) : impl_(std::make_unique<Impl>(std::move(config))) {}
Server::~Server() = default;

int Server::start(const std::string& host, int port) {
    int bound = port;
    if (port == 0) {
        bound = impl_->http.bind_to_any_port(host);
    } else if (!impl_->http.bind_to_port(host, port)) {
        bound = -1;
    }
    if (bound < 0) throw IoError("cannot bind " + host + ":" + std::to_string(port));
    impl_->listener = std::thread([this] { impl_->http.listen_after_bind(); });
    impl_->http.wait_until_ready();
    return bound;
}

bool Server::run(const std::string& host, int port) { return impl_->http.listen(host, port); }

void Server::stop() { impl_->http.stop(); }

std::pair<std::string, int> parse_listen(const std::string& text) {
    std::string host = "127.0.0.1";
    std::string port = text;
    if (auto c = text.rfind(':'); c != std::string::npos) {
        if (c > 0) host = text.substr(0, c);
        port = text.substr(c + 1);
    }
    char* end = nullptr;
    long p = std::strtol(port.c_str(), &end, 10);
    if (port.empty() || *end || p < 0 || p > 65535) throw ArgumentError("invalid listen address '" + text + "'");
    return {host, static_cast<int>(p)};
}

} // namespace plume::service
