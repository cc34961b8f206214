#include "traitgrade/checkpoint.hpp"

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "traitgrade/errors.hpp"

namespace traitgrade {

namespace {

constexpr std::array<char, 8> kMagic{'T', 'G', 'R', 'A', 'D', 'E', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

void put_u64(std::ostream& out, std::uint64_t v) {
  std::array<char, 8> b;
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(b.data(), 8);
}

std::uint64_t get_u64(std::istream& in) {
  std::array<unsigned char, 8> b{};
  if (!in.read(reinterpret_cast<char*>(b.data()), 8)) throw ArgumentError("checkpoint is truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

void put_string(std::ostream& out, std::string_view s) {
  put_u64(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in) {
  const auto n = get_u64(in);
  if (n > (std::uint64_t{1} << 32)) throw ArgumentError("checkpoint string length is implausible");
  std::string s(n, '\0');
  if (!in.read(s.data(), static_cast<std::streamsize>(n))) throw ArgumentError("checkpoint is truncated");
  return s;
}

}  // namespace

void write_checkpoint(std::ostream& out, Model& model, const Vocabulary& vocab) {
  out.write(kMagic.data(), kMagic.size());
  put_u64(out, kVersion);
  put_u64(out, sizeof(Real));
  put_string(out, config_to_json(model.config()));
  put_u64(out, vocab.size());
  for (const auto& t : vocab.tokens()) put_string(out, t);
  const auto params = model.named_parameters();
  put_u64(out, params.size());
  for (const auto& [name, tensor] : params) {
    put_string(out, name);
    put_u64(out, tensor->shape().size());
    for (auto d : tensor->shape()) put_u64(out, d);
    for (Real v : tensor->data()) {
      std::uint64_t bits = 0;
      if constexpr (sizeof(Real) == 8) {
        std::memcpy(&bits, &v, 8);
      } else {
        std::uint32_t b32;
        std::memcpy(&b32, &v, 4);
        bits = b32;
      }
      put_u64(out, bits);
    }
  }
  if (!out) throw ArgumentError("failed to write checkpoint");
}

void save_checkpoint(const std::filesystem::path& path, Model& model, const Vocabulary& vocab) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ArgumentError("cannot open " + tmp + " for writing");
    write_checkpoint(out, model, vocab);
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint read_checkpoint(std::istream& in) {
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) throw ArgumentError("not a traitgrade checkpoint");
  if (const auto v = get_u64(in); v != kVersion)
    throw ArgumentError("unsupported checkpoint version " + std::to_string(v));
  if (const auto w = get_u64(in); w != sizeof(Real))
    throw ArgumentError("checkpoint stores " + std::to_string(8 * w) + "-bit values but this build uses " +
                        std::to_string(8 * sizeof(Real)) + "-bit");
  Model model(config_from_json(get_string(in)));

  const auto vocab_size = get_u64(in);
  std::vector<std::string> tokens;
  for (std::uint64_t i = 0; i < vocab_size; ++i) tokens.push_back(get_string(in));
  if (tokens.size() < 2) throw ArgumentError("checkpoint vocabulary lacks special tokens");
  Vocabulary vocab = Vocabulary::from_tokens(std::span<const std::string>(tokens).subspan(2));

  auto params = model.named_parameters();
  if (const auto n = get_u64(in); n != params.size())
    throw ArgumentError("checkpoint holds " + std::to_string(n) + " tensors, model expects " +
                        std::to_string(params.size()));
  for (auto& [name, tensor] : params) {
    const auto stored = get_string(in);
    if (stored != name) throw ArgumentError("checkpoint tensor '" + stored + "' where '" + name + "' was expected");
    Shape shape(get_u64(in));
    for (auto& d : shape) d = get_u64(in);
    if (shape != tensor->shape())
      throw ShapeError("checkpoint tensor '" + name + "' has shape " + to_string(shape) + ", model expects " +
                       to_string(tensor->shape()));
    for (Real& v : tensor->data()) {
      const auto bits = get_u64(in);
      if constexpr (sizeof(Real) == 8) {
        std::memcpy(&v, &bits, 8);
      } else {
        const auto b32 = static_cast<std::uint32_t>(bits);
        std::memcpy(&v, &b32, 4);
      }
    }
  }
  return {std::move(model), std::move(vocab)};
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArgumentError("cannot open checkpoint " + path.string());
  return read_checkpoint(in);
}

}  // namespace traitgrade
