#include "mmkd/eval/pca.hpp"

#include "mmkd/error.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

namespace mmkd::eval {

namespace {

void fix_sign(Eigen::Ref<nn::RowVector> v) {
  Eigen::Index at = 0;
  v.cwiseAbs().maxCoeff(&at);
  if (v(at) < 0.0) v = -v;
}

// Unit vector orthogonal to `basis` rows, from the first coordinate axis
// that survives Gram-Schmidt.
nn::RowVector complete(const nn::Matrix& basis, Eigen::Index dim) {
  for (Eigen::Index axis = 0; axis < dim; ++axis) {
    nn::RowVector v = nn::RowVector::Unit(dim, axis);
    for (Eigen::Index r = 0; r < basis.rows(); ++r) v -= v.dot(basis.row(r)) * basis.row(r);
    const double n = v.norm();
    if (n > 1e-6) return v / n;
  }
  return nn::RowVector::Zero(dim);
}

std::string svg_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

Pca2 pca2(const nn::Matrix& data) {
  const Eigen::Index n = data.rows();
  const Eigen::Index d = data.cols();
  if (n < 2 || d < 2) {
    throw Error(ErrorKind::kInsufficientSamples, "PCA needs at least 2 samples and 2 features");
  }
  Pca2 out;
  out.mean = data.colwise().mean();
  const nn::Matrix centred = data.rowwise() - out.mean;
  const nn::Matrix gram = centred * centred.transpose();
  Eigen::SelfAdjointEigenSolver<nn::Matrix> eig(gram);
  // Eigenvalues ascend; the largest two are at the end.
  const auto& values = eig.eigenvalues();
  const auto& vectors = eig.eigenvectors();
  const double top = std::max(values(n - 1), 0.0);

  out.components = nn::Matrix::Zero(2, d);
  for (int k = 0; k < 2; ++k) {
    const double lambda = values(n - 1 - k);
    nn::RowVector v = nn::RowVector::Zero(d);
    if (lambda > 1e-12 * std::max(top, 1e-300)) {
      v = (centred.transpose() * vectors.col(n - 1 - k)).transpose();
      for (int j = 0; j < k; ++j) v -= v.dot(out.components.row(j)) * out.components.row(j);
      const double norm = v.norm();
      v = norm > 0.0 ? nn::RowVector(v / norm) : nn::RowVector::Zero(d);
    }
    if (v.squaredNorm() == 0.0) v = complete(out.components.topRows(k), d);
    fix_sign(v);
    out.components.row(k) = v;
  }
  out.coords = centred * out.components.transpose();
  for (int k = 0; k < 2; ++k) {
    out.variance[static_cast<std::size_t>(k)] =
        out.coords.col(k).squaredNorm() / static_cast<double>(n - 1);
  }
  return out;
}

std::vector<DurationBin> default_duration_bins() { return {{"<=10s", 0.0, 10.0}, {"10-25s", 10.0, 25.0}}; }

std::vector<PcaProjection> pca_spectrograms(const std::vector<PcaSample>& samples,
                                            std::size_t num_classes, std::size_t n_per_group,
                                            std::uint64_t seed,
                                            const std::vector<DurationBin>& bins) {
  std::vector<PcaProjection> out;
  std::mt19937_64 rng(seed);
  for (std::size_t b = 0; b < bins.size(); ++b) {
    const auto& bin = bins[b];
    std::vector<std::vector<std::size_t>> by_class(num_classes);
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const double t = samples[i].duration;
      const bool inside = (b == 0 ? t >= bin.lo : t > bin.lo) && t <= bin.hi;
      if (!inside) continue;
      if (samples[i].label >= num_classes) {
        throw Error(ErrorKind::kUnknownLabel, "sample " + samples[i].id + " has an unknown class");
      }
      by_class[samples[i].label].push_back(i);
    }
    PcaProjection proj;
    proj.bin = bin;
    std::vector<std::size_t> chosen;
    for (std::size_t c = 0; c < num_classes; ++c) {
      auto& pool = by_class[c];
      if (pool.size() < n_per_group) {
        throw Error(ErrorKind::kInsufficientSamples,
                    "bin " + bin.name + " has " + std::to_string(pool.size()) +
                        " samples of class " + std::to_string(c) + ", need " +
                        std::to_string(n_per_group));
      }
      std::shuffle(pool.begin(), pool.end(), rng);
      chosen.insert(chosen.end(), pool.begin(),
                    pool.begin() + static_cast<std::ptrdiff_t>(n_per_group));
    }
    Eigen::Index bins_width = 0;
    for (auto i : chosen) {
      proj.frames = std::max(proj.frames, samples[i].spectrogram.rows());
      bins_width = std::max(bins_width, samples[i].spectrogram.cols());
    }
    nn::Matrix data = nn::Matrix::Zero(static_cast<Eigen::Index>(chosen.size()), proj.frames * bins_width);
    for (std::size_t r = 0; r < chosen.size(); ++r) {
      const auto& s = samples[chosen[r]];
      nn::Matrix padded = nn::Matrix::Zero(proj.frames, bins_width);
      padded.topLeftCorner(s.spectrogram.rows(), s.spectrogram.cols()) = s.spectrogram;
      // Row-major flattening: frame by frame.
      for (Eigen::Index f = 0; f < proj.frames; ++f) {
        data.block(static_cast<Eigen::Index>(r), f * bins_width, 1, bins_width) = padded.row(f);
      }
      proj.ids.push_back(s.id);
      proj.labels.push_back(s.label);
      proj.durations.push_back(s.duration);
    }
    proj.pca = pca2(data);
    out.push_back(std::move(proj));
  }
  return out;
}

void write_pca_plot(const std::vector<PcaProjection>& projections,
                    const std::vector<std::string>& classes, const std::filesystem::path& svg) {
  static const char* kColours[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
  constexpr double kPanel = 360.0, kMargin = 40.0;
  if (svg.has_parent_path()) std::filesystem::create_directories(svg.parent_path());
  std::ostringstream body;
  body << std::setprecision(6);
  const double width = kPanel * static_cast<double>(std::max<std::size_t>(projections.size(), 1));
  body << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
       << kPanel + 30 << "\" font-family=\"sans-serif\" font-size=\"9\">\n";
  for (std::size_t p = 0; p < projections.size(); ++p) {
    const auto& proj = projections[p];
    const double x0 = kPanel * static_cast<double>(p);
    const auto& c = proj.pca.coords;
    const double xmin = c.col(0).minCoeff(), xmax = c.col(0).maxCoeff();
    const double ymin = c.col(1).minCoeff(), ymax = c.col(1).maxCoeff();
    const auto sx = [&](double v) {
      return x0 + kMargin + (xmax > xmin ? (v - xmin) / (xmax - xmin) : 0.5) * (kPanel - 2 * kMargin);
    };
    const auto sy = [&](double v) {
      return kMargin + (ymax > ymin ? (ymax - v) / (ymax - ymin) : 0.5) * (kPanel - 2 * kMargin);
    };
    body << "<rect x=\"" << x0 + 5 << "\" y=\"5\" width=\"" << kPanel - 10 << "\" height=\""
         << kPanel - 10 << "\" fill=\"none\" stroke=\"#999\"/>\n";
    body << "<text x=\"" << x0 + kPanel / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"12\">"
         << svg_escape(proj.bin.name) << "</text>\n";
    for (Eigen::Index i = 0; i < c.rows(); ++i) {
      const auto label = proj.labels[static_cast<std::size_t>(i)];
      const char* colour = kColours[label % std::size(kColours)];
      body << "<circle cx=\"" << sx(c(i, 0)) << "\" cy=\"" << sy(c(i, 1)) << "\" r=\"4\" fill=\""
           << colour << "\"/>\n";
      body << "<text x=\"" << sx(c(i, 0)) + 5 << "\" y=\"" << sy(c(i, 1)) - 5 << "\">"
           << svg_escape(proj.ids[static_cast<std::size_t>(i)]) << "</text>\n";
    }
  }
  for (std::size_t k = 0; k < classes.size(); ++k) {
    const double x = 10.0 + 120.0 * static_cast<double>(k);
    body << "<rect x=\"" << x << "\" y=\"" << kPanel + 12 << "\" width=\"8\" height=\"8\" fill=\""
         << kColours[k % std::size(kColours)] << "\"/><text x=\"" << x + 12 << "\" y=\""
         << kPanel + 20 << "\">" << svg_escape(classes[k]) << "</text>\n";
  }
  body << "</svg>\n";
  std::ofstream out(svg);
  if (!out) throw Error(ErrorKind::kIoError, "cannot write " + svg.string());
  out << body.str();

  auto csv_path = svg;
  csv_path.replace_extension(".csv");
  std::ofstream csv(csv_path);
  if (!csv) throw Error(ErrorKind::kIoError, "cannot write " + csv_path.string());
  csv << "id,x,y,class,duration,bin\n" << std::setprecision(17);
  for (const auto& proj : projections) {
    for (std::size_t i = 0; i < proj.ids.size(); ++i) {
      const auto label = proj.labels[i];
      csv << proj.ids[i] << ',' << proj.pca.coords(static_cast<Eigen::Index>(i), 0) << ','
          << proj.pca.coords(static_cast<Eigen::Index>(i), 1) << ','
          << (label < classes.size() ? classes[label] : std::to_string(label)) << ','
          << proj.durations[i] << ',' << proj.bin.name << '\n';
    }
  }
}

}  // namespace mmkd::eval
