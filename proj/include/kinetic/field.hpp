#pragma once

#include <Eigen/Dense>

#include <vector>

namespace kinetic {

// Uniform cells on the channel [-H, H] in x1.
struct SpatialMesh {
    double H = 1.0;
    int n_cells = 0;
    double dx = 0.0;
    std::vector<double> centers;
    double edge(int i) const { return -H + i * dx; }
};

SpatialMesh make_mesh(double H, int n_cells);

enum class FieldMode { fluctuation, absolute };

// cell_average: one column per cell at its centre.
// dg_nodal: two columns per cell at its left and right edges (linear inside the cell).
enum class Layout { cell_average, dg_nodal };

// Velocity values (rows) at every spatial column.
struct DistributionField {
    Eigen::MatrixXd values;
    SpatialMesh mesh;
    Layout layout = Layout::cell_average;
    FieldMode mode = FieldMode::fluctuation;

    DistributionField() = default;
    DistributionField(int n_velocity, const SpatialMesh& m, Layout l, FieldMode md = FieldMode::fluctuation);

    int columns() const { return static_cast<int>(values.cols()); }
    double position(int col) const;
    // quadrature weight in x1 carried by the column
    double weight(int) const { return layout == Layout::dg_nodal ? 0.5 * mesh.dx : mesh.dx; }
    int left_trace() const { return 0; }
    int right_trace() const { return columns() - 1; }
    // per-cell averages (identity for cell_average)
    Eigen::MatrixXd cell_averages() const;
};

}  // namespace kinetic
