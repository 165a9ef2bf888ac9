#include "vsn/container.hpp"

#include <numeric>

#include "binary_io.hpp"
#include "vsn/error.hpp"

namespace vsn {

namespace {
constexpr std::uint16_t kArchiveVersion = 1;
}

Tensor Tensor::from(const Eigen::MatrixXd& m, DType dtype) {
    Tensor t;
    t.dtype = dtype;
    t.shape = {static_cast<std::uint32_t>(m.rows()), static_cast<std::uint32_t>(m.cols())};
    t.data.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) t.data.push_back(m(r, c));
    return t;
}

Tensor Tensor::from(const Eigen::VectorXd& v, DType dtype) {
    Tensor t;
    t.dtype = dtype;
    t.shape = {static_cast<std::uint32_t>(v.size())};
    t.data.assign(v.data(), v.data() + v.size());
    return t;
}

std::size_t Tensor::numel() const {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                           [](std::size_t a, std::uint32_t b) { return a * b; });
}

Eigen::MatrixXd Tensor::matrix() const {
    if (shape.size() == 1) return vector();
    if (shape.size() != 2) throw Error(Errc::ShapeMismatch, "tensor is not rank 1 or 2");
    Eigen::MatrixXd m(shape[0], shape[1]);
    for (std::uint32_t r = 0; r < shape[0]; ++r)
        for (std::uint32_t c = 0; c < shape[1]; ++c) m(r, c) = data[r * shape[1] + c];
    return m;
}

Eigen::VectorXd Tensor::vector() const {
    Eigen::VectorXd v(static_cast<Eigen::Index>(data.size()));
    for (std::size_t i = 0; i < data.size(); ++i) v(static_cast<Eigen::Index>(i)) = data[i];
    return v;
}

const Tensor& TensorArchive::at(const std::string& name) const {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw Error(Errc::MissingArtifact, "tensor '" + name + "' not in archive");
    return it->second;
}

std::string TensorArchive::encode() const {
    std::string out = "NMT1";
    detail::put_le<std::uint16_t>(out, kArchiveVersion);
    const std::string h = header.dump();
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(h.size()));
    out += h;
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
    for (const auto& [name, t] : tensors) {
        if (t.numel() != t.data.size()) throw Error(Errc::ShapeMismatch, "tensor '" + name + "' shape/data mismatch");
        detail::put_le<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
        out += name;
        out.push_back(static_cast<char>(t.dtype));
        out.push_back(static_cast<char>(t.shape.size()));
        for (auto d : t.shape) detail::put_le<std::uint32_t>(out, d);
        for (double v : t.data) {
            if (t.dtype == DType::f32) detail::put_f32(out, static_cast<float>(v));
            else detail::put_f64(out, v);
        }
    }
    return out;
}

TensorArchive TensorArchive::decode(std::string_view bytes) {
    if (bytes.size() < 4 || bytes.substr(0, 4) != "NMT1") throw Error(Errc::BadMagic, "not an NMT1 archive");
    detail::Reader rd(bytes.substr(4));
    const auto version = rd.le<std::uint16_t>();
    if (version != kArchiveVersion) throw Error(Errc::VersionMismatch, "archive version " + std::to_string(version));
    TensorArchive a;
    const auto hlen = rd.le<std::uint32_t>();
    try {
        a.header = nlohmann::json::parse(rd.take(hlen));
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(Errc::MalformedRecord, std::string("archive header: ") + e.what());
    }
    const auto n = rd.le<std::uint32_t>();
    for (std::uint32_t i = 0; i < n; ++i) {
        const auto name_len = rd.le<std::uint16_t>();
        std::string name(rd.take(name_len));
        Tensor t;
        const auto dtype = rd.le<std::uint8_t>();
        if (dtype > 1) throw Error(Errc::MalformedRecord, "tensor '" + name + "': unknown dtype");
        t.dtype = static_cast<DType>(dtype);
        const auto rank = rd.le<std::uint8_t>();
        for (std::uint8_t r = 0; r < rank; ++r) t.shape.push_back(rd.le<std::uint32_t>());
        const std::size_t count = t.numel();
        t.data.resize(count);
        for (std::size_t k = 0; k < count; ++k) t.data[k] = t.dtype == DType::f32 ? rd.f32() : rd.f64();
        a.tensors.emplace(std::move(name), std::move(t));
    }
    if (rd.remaining() != 0) throw Error(Errc::ShapeMismatch, "trailing bytes after last tensor");
    return a;
}

void TensorArchive::save(const std::filesystem::path& path) const { detail::spit(path, encode()); }

TensorArchive TensorArchive::load(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw Error(Errc::MissingArtifact, path.string());
    return decode(detail::slurp(path));
}

}  // namespace vsn
