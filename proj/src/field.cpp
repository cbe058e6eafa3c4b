#include "kinetic/field.hpp"

#include <stdexcept>

namespace kinetic {

SpatialMesh make_mesh(double H, int n_cells) {
    if (n_cells < 16) throw std::invalid_argument("the channel needs at least 16 cells");
    if (!(H > 0.0)) throw std::invalid_argument("H must be positive");
    SpatialMesh m;
    m.H = H;
    m.n_cells = n_cells;
    m.dx = 2.0 * H / n_cells;
    m.centers.resize(n_cells);
    for (int i = 0; i < n_cells; ++i) m.centers[i] = -H + (i + 0.5) * m.dx;
    return m;
}

DistributionField::DistributionField(int n_velocity, const SpatialMesh& m, Layout l, FieldMode md)
    : values(Eigen::MatrixXd::Zero(n_velocity, l == Layout::dg_nodal ? 2 * m.n_cells : m.n_cells)),
      mesh(m),
      layout(l),
      mode(md) {}

double DistributionField::position(int col) const {
    if (layout == Layout::cell_average) return mesh.centers[col];
    return mesh.edge(col / 2 + col % 2);
}

Eigen::MatrixXd DistributionField::cell_averages() const {
    if (layout == Layout::cell_average) return values;
    Eigen::MatrixXd avg(values.rows(), mesh.n_cells);
    for (int j = 0; j < mesh.n_cells; ++j) avg.col(j) = 0.5 * (values.col(2 * j) + values.col(2 * j + 1));
    return avg;
}

}  // namespace kinetic
