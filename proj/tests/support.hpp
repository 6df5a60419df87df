#pragma once

#include <atomic>
#include <filesystem>
#include <string>

#include <unistd.h>

#include "plume/analysis.hpp"

namespace support {

inline std::filesystem::path fixture(const std::string& name) {
    return std::filesystem::path(PLUME_SOURCE_DIR) / "data" / name;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("plume-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

// Fitted once per process.
inline const plume::Analysis& analysis(const std::string& name) {
    static const plume::Analysis basic = plume::run_analysis(plume::load_dataset(fixture("basic")), {});
    if (name == "basic") return basic;
    static const plume::Analysis comprehensive =
        plume::run_analysis(plume::load_dataset(fixture("comprehensive")), {});
    return comprehensive;
}

} // namespace support
