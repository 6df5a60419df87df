#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <string>

namespace plume::service {

struct Config {
    std::filesystem::path data_dir = "plume-data";
    int workers = 2;  // 0 leaves submitted jobs queued
    std::size_t max_upload = 64u << 20;
};

// HTTP/JSON front-end over the engine. Datasets are stored under
// data_dir/datasets/<sha256>, analyses under data_dir/analyses/<id>; finished
// analyses survive restarts and are reloaded on first access.
class Server {
public:
    explicit Server(Config config);
    ~Server();
    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;

    // Binds and serves on a background thread. Port 0 picks a free port.
    // Returns the bound port.
    int start(const std::string& host, int port = 0);
    // Binds and serves on the calling thread until stop().
    bool run(const std::string& host, int port);
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// "host:port", ":port" or "port".
std::pair<std::string, int> parse_listen(const std::string& text);

} // namespace plume::service
