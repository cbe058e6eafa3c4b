#pragma once

#include "kinetic/harness.hpp"

#include <filesystem>
#include <fstream>
#include <memory>
#include <random>
#include <string>

namespace kt {

// 12^3 grid, kernel and matrices, built once per process
inline const kinetic::Workspace& workspace12() {
    static std::unique_ptr<kinetic::Workspace> ws = [] {
        kinetic::RunConfig c;
        return kinetic::make_workspace(c, true);
    }();
    return *ws;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("kinetic_tests_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

inline double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace kt
