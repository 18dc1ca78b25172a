#include "camreid/checkpoint.hpp"

#include <array>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

namespace camreid::apra {
namespace {

struct Section {
  const char* name;
  Variable weight;
  Variable bias;
};

std::array<Section, 4> sections(const ApraParams& p, const CameraHead& h) {
  return {{{"channel_mlp_1", p.mlp1_weight, p.mlp1_bias},
           {"channel_mlp_2", p.mlp2_weight, p.mlp2_bias},
           {"spatial_conv", p.spatial_kernel, p.spatial_bias},
           {"camera_head", h.weight, h.bias}}};
}

void expect_token(std::istream& is, const std::string& want) {
  std::string got;
  if (!(is >> got) || got != want) {
    throw std::runtime_error("checkpoint: expected '" + want + "', found '" +
                             got + "'");
  }
}

void read_into(std::istream& is, Variable& v, const std::string& where) {
  Tensor t = read_tensor(is);
  if (t.shape() != v.shape()) {
    throw std::runtime_error("checkpoint: " + where + " has shape " +
                             t.shape().str() + ", model expects " +
                             v.shape().str());
  }
  v.mutable_value() = std::move(t);
}

}  // namespace

void write_checkpoint(std::ostream& os, const ApraParams& params,
                      const CameraHead& head) {
  for (const auto& s : sections(params, head)) {
    os << "section " << s.name << "\nweight\n";
    write_tensor(os, s.weight.value());
    os << "bias\n";
    write_tensor(os, s.bias.value());
  }
}

void read_checkpoint(std::istream& is, ApraParams& params, CameraHead& head) {
  for (auto s : sections(params, head)) {
    expect_token(is, "section");
    expect_token(is, s.name);
    expect_token(is, "weight");
    read_into(is, s.weight, std::string(s.name) + ".weight");
    expect_token(is, "bias");
    read_into(is, s.bias, std::string(s.name) + ".bias");
  }
}

void save_checkpoint(const std::filesystem::path& path, const ApraParams& params,
                     const CameraHead& head) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  write_checkpoint(out, params, head);
}

void load_checkpoint(const std::filesystem::path& path, ApraParams& params,
                     CameraHead& head) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  read_checkpoint(in, params, head);
}

}  // namespace camreid::apra
