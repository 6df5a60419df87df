// Regenerates the example datasets under data/.
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "plume/dataset.hpp"
#include "plume/fixtures.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Write the seeded example datasets"};
    std::string out = "data";
    app.add_option("--out", out, "Destination root")->capture_default_str();
    CLI11_PARSE(app, argc, argv);

    for (const char* name : {"basic", "comprehensive"}) {
        const auto dir = std::filesystem::path(out) / name;
        std::filesystem::create_directories(dir);
        for (const auto& [file, content] : plume::fixtures::generate(name)) plume::write_file(dir / file, content);
        std::cout << dir.string() << "\n";
    }
    return 0;
}
