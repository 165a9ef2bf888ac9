// Python access to the embedding container and a few feature functions,
// mainly for the embedding adapter that writes NME1 files.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "vsn/acoustic.hpp"
#include "vsn/corpus.hpp"
#include "vsn/error.hpp"
#include "vsn/refmetrics.hpp"

namespace py = pybind11;

namespace {

using RowMajorF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using F32Array = py::array_t<float, py::array::c_style | py::array::forcecast>;
using U8Array = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

Eigen::MatrixXf to_matrix(const F32Array& a, const char* name) {
    if (a.ndim() != 2) throw vsn::Error(vsn::Errc::ShapeMismatch, std::string(name) + " must be 2-D");
    return Eigen::Map<const RowMajorF>(a.data(), a.shape(0), a.shape(1));
}

vsn::EmbeddingSequence make_sequence(const F32Array& image, const F32Array& text, const U8Array& mask) {
    vsn::EmbeddingSequence s;
    s.image = to_matrix(image, "image");
    s.text = to_matrix(text, "text");
    if (mask.ndim() != 1) throw vsn::Error(vsn::Errc::ShapeMismatch, "mask must be 1-D");
    s.mask.assign(mask.data(), mask.data() + mask.size());
    vsn::validate_embeddings(s);
    return s;
}

py::tuple to_python(const vsn::EmbeddingSequence& s) {
    auto out = [](const Eigen::MatrixXf& m) {
        F32Array a({m.rows(), m.cols()});
        Eigen::Map<RowMajorF>(a.mutable_data(), m.rows(), m.cols()) = m;
        return a;
    };
    U8Array mask(static_cast<py::ssize_t>(s.mask.size()));
    std::copy(s.mask.begin(), s.mask.end(), mask.mutable_data());
    return py::make_tuple(out(s.image), out(s.text), mask);
}

}  // namespace

PYBIND11_MODULE(_vsn, m) {
    static py::exception<vsn::Error> error(m, "VsnError");
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const vsn::Error& e) {
            // args = (code, message) so callers can branch on the code
            const py::tuple args = py::make_tuple(vsn::to_string(e.code()), e.what());
            PyErr_SetObject(error.ptr(), args.ptr());
        }
    });

    m.attr("EMBEDDING_VERSION") = vsn::kEmbeddingVersion;

    m.def(
        "encode_embeddings",
        [](const F32Array& image, const F32Array& text, const U8Array& mask) {
            return py::bytes(vsn::encode_embeddings(make_sequence(image, text, mask)));
        },
        py::arg("image"), py::arg("text"), py::arg("mask"));
    m.def(
        "decode_embeddings", [](const py::bytes& b) { return to_python(vsn::decode_embeddings(std::string(b))); },
        py::arg("data"));
    m.def(
        "write_embeddings",
        [](const std::filesystem::path& path, const F32Array& image, const F32Array& text, const U8Array& mask) {
            vsn::write_embeddings(make_sequence(image, text, mask), path);
        },
        py::arg("path"), py::arg("image"), py::arg("text"), py::arg("mask"));
    m.def(
        "read_embeddings", [](const std::filesystem::path& path) { return to_python(vsn::read_embeddings(path)); },
        py::arg("path"));

    m.def(
        "acoustic_features",
        [](const std::vector<std::pair<double, double>>& segments, int syllables) {
            vsn::VadSegments v;
            for (const auto& [s, e] : segments) v.segments.push_back({s, e});
            vsn::validate_vad(v);
            const auto a = vsn::acoustic::acoustic_features(v, syllables).values();
            return std::vector<double>(a.begin(), a.end());
        },
        py::arg("segments"), py::arg("syllables"));

    m.def(
        "bleu",
        [](const vsn::refmetrics::Tokens& hyp, const std::vector<vsn::refmetrics::Tokens>& refs, int n) {
            return vsn::refmetrics::sentence_bleu(hyp, refs, n);
        },
        py::arg("hyp"), py::arg("refs"), py::arg("n") = 4);
    m.def("rouge_l", &vsn::refmetrics::rouge_l, py::arg("hyp"), py::arg("ref"));
    m.def(
        "meteor", [](const vsn::refmetrics::Tokens& h, const vsn::refmetrics::Tokens& r) { return vsn::refmetrics::meteor(h, r); },
        py::arg("hyp"), py::arg("ref"));
}
