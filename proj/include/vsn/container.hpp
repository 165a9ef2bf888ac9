#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace vsn {

enum class DType : std::uint8_t { f32 = 0, f64 = 1 };

struct Tensor {
    std::vector<std::uint32_t> shape;
    std::vector<double> data;  // row-major
    DType dtype = DType::f32;

    static Tensor from(const Eigen::MatrixXd& m, DType dtype = DType::f32);
    static Tensor from(const Eigen::VectorXd& v, DType dtype = DType::f32);
    Eigen::MatrixXd matrix() const;  // rank 1 -> column, rank 2 as is
    Eigen::VectorXd vector() const;
    std::size_t numel() const;
};

/// Model artifact container shared by the DTM, TITAN and shallow models:
///
///   "NMT1" | version u16 | header_len u32 | header (UTF-8 JSON)
///   | n_tensors u32 | { name_len u16 | name | dtype u8 | rank u8
///   | dims u32[rank] | little-endian payload }*
///
/// Values stored as f32 are rounded on write; readers get them back as
/// doubles.
struct TensorArchive {
    nlohmann::json header = nlohmann::json::object();
    std::map<std::string, Tensor> tensors;

    const Tensor& at(const std::string& name) const;

    std::string encode() const;
    static TensorArchive decode(std::string_view bytes);
    void save(const std::filesystem::path& path) const;
    static TensorArchive load(const std::filesystem::path& path);
};

}  // namespace vsn
