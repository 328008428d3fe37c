#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "styleshift/corruptions.hpp"
#include "styleshift/error.hpp"
#include "styleshift/evaluation.hpp"
#include "styleshift/frequency.hpp"
#include "styleshift/stylization.hpp"

namespace py = pybind11;
using namespace styleshift;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Image to_image(const Array& a) {
  if (a.ndim() != 3 || a.shape(2) != 3) {
    throw Error("python.shape", "expected an H x W x 3 array");
  }
  Image img(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)), 3);
  std::copy(a.data(), a.data() + a.size(), img.data().begin());
  return img;
}

Array to_array(const Image& img) {
  Array out({img.height(), img.width(), img.channels()});
  std::copy(img.data().begin(), img.data().end(), out.mutable_data());
  return out;
}

std::unique_ptr<stylization::FeatureExtractor> features_named(const std::string& name) {
  if (name == "filterbank") return std::make_unique<stylization::FilterBankFeatures>();
  if (name == "pixels") return std::make_unique<stylization::PixelFeatures>();
  throw Error("python.features", "unknown feature extractor '" + name + "'");
}

}  // namespace

PYBIND11_MODULE(_styleshift, m) {
  m.doc() = "Bindings over the styleshift core library";
  m.attr("__version__") = "0.3.0";

  static py::exception<Error> error(m, "StyleshiftError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      PyErr_SetString(error.ptr(), (e.code() + ": " + e.what()).c_str());
    }
  });

  m.def("corruption_names", &corruptions::corruption_names);
  m.def("severity_table_version",
        [] { return std::string(corruptions::severity_table_version()); });
  m.def("category_of", [](const std::string& name) {
    return std::string(corruptions::to_string(corruptions::category_of(name)));
  });
  m.def("all_specs", [] {
    std::vector<std::pair<std::string, int>> out;
    for (const auto& s : corruptions::all_specs()) out.emplace_back(s.name, s.severity);
    return out;
  });

  m.def(
      "apply_corruption",
      [](const Array& image, const std::string& name, int severity, std::uint64_t seed) {
        return to_array(corruptions::apply_corruption(
            to_image(image), corruptions::CorruptionSpec::make(name, severity), seed));
      },
      py::arg("image"), py::arg("name"), py::arg("severity"), py::arg("seed") = 0,
      "Corrupts an H x W x 3 image with values in [0, 1].");

  m.def(
      "lowpass_filter",
      [](const Array& image, std::optional<double> tau) {
        const Image img = to_image(image);
        const auto spec = tau ? frequency::LowPassSpec{*tau}
                              : frequency::LowPassSpec::for_resolution(img.width());
        return to_array(frequency::lowpass_filter(img, spec));
      },
      py::arg("image"), py::arg("tau") = py::none(),
      "Ideal circular low-pass; tau defaults to the resolution-scaled radius.");

  m.def(
      "radial_spectrum",
      [](const Array& image) { return frequency::compute_spectrum(to_image(image)).power; },
      py::arg("image"), "Mean squared magnitude per integer radius bin.");

  m.def(
      "stylize",
      [](const Array& content, const Array& style, double strength, const std::string& space) {
        stylization::Stylizer s;
        s.strength = strength;
        s.feature_space = stylization::parse_feature_space(space);
        return to_array(stylization::moment_match_stylize(to_image(content), to_image(style), s));
      },
      py::arg("content"), py::arg("style"), py::arg("strength") = 1.0,
      py::arg("feature_space") = "decorrelated_color");

  m.def(
      "gram_distance",
      [](const Array& a, const Array& b, const std::string& features) {
        return stylization::gram_distance(to_image(a), to_image(b), *features_named(features));
      },
      py::arg("a"), py::arg("b"), py::arg("features") = "filterbank");

  m.def(
      "mean_corruption_accuracy",
      [](const evaluation::AccuracyTable& table) {
        return evaluation::mean_corruption_accuracy(table);
      },
      py::arg("table"), "Category-balanced mean over a {(name, severity): accuracy} table.");

  m.def("combined_mean", py::overload_cast<double, double>(&evaluation::combined_mean),
        py::arg("corruption_acc"), py::arg("ood_acc"));
}
