#include <cstring>
#include <fstream>

#include <json.hpp>

#include "cael/models.hpp"

namespace cael::models {

namespace {

constexpr char kMagic[8] = {'C', 'A', 'E', 'L', 'C', 'K', 'P', '1'};

void write_u64(std::ostream& os, std::uint64_t v) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(buf), 8);
}

std::uint64_t read_u64(std::istream& is) {
  unsigned char buf[8];
  is.read(reinterpret_cast<char*>(buf), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

void write_doubles(std::ostream& os, const std::vector<double>& v) {
  os.write(reinterpret_cast<const char*>(v.data()),
           static_cast<std::streamsize>(v.size() * sizeof(double)));
}

std::vector<double> read_doubles(std::istream& is, std::size_t count) {
  std::vector<double> v(count);
  is.read(reinterpret_cast<char*>(v.data()),
          static_cast<std::streamsize>(count * sizeof(double)));
  return v;
}

}  // namespace

void save_checkpoint(const EmbeddingNet& net, const PosteriorModel& posterior,
                     const std::string& path) {
  const std::vector<double> params = net.parameters();
  const std::vector<double> buffers = net.buffers();
  const Eigen::MatrixXd& u = posterior.weights();
  const Eigen::VectorXd& c = posterior.intercept();

  nlohmann::json header;
  header["format"] = 1;
  header["byte_order"] = "little";
  header["net"] = {{"context_dim", net.context_dim()},
                   {"num_actions", net.num_actions()},
                   {"hidden_width", net.hidden_width()},
                   {"dropout", net.dropout_rate()}};
  header["posterior"] = {{"context_dim", posterior.context_dim()},
                         {"embed_dim", posterior.embed_dim()},
                         {"num_actions", posterior.num_actions()}};
  header["tensors"] = nlohmann::json::array(
      {{{"name", "net_params"}, {"count", params.size()}},
       {{"name", "net_buffers"}, {"count", buffers.size()}},
       {{"name", "posterior_weights"},
        {"rows", u.rows()},
        {"cols", u.cols()}},
       {{"name", "posterior_intercept"}, {"count", c.size()}}});
  const std::string head = header.dump();

  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open checkpoint for writing: " + path);
  os.write(kMagic, sizeof(kMagic));
  write_u64(os, head.size());
  os.write(head.data(), static_cast<std::streamsize>(head.size()));
  write_doubles(os, params);
  write_doubles(os, buffers);
  std::vector<double> uv;
  uv.reserve(static_cast<std::size_t>(u.size()));
  for (int i = 0; i < u.rows(); ++i) {
    for (int j = 0; j < u.cols(); ++j) uv.push_back(u(i, j));
  }
  write_doubles(os, uv);
  write_doubles(os, std::vector<double>(c.data(), c.data() + c.size()));
  if (!os) throw IoError("failed writing checkpoint: " + path);
}

TrainedModels load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint: " + path);
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw DataError("not a checkpoint file: " + path);
  }
  const std::uint64_t head_len = read_u64(is);
  std::string head(head_len, '\0');
  is.read(head.data(), static_cast<std::streamsize>(head_len));
  if (!is) throw DataError("truncated checkpoint header: " + path);

  nlohmann::json header = nlohmann::json::parse(head, nullptr, false);
  if (header.is_discarded()) {
    throw DataError("corrupt checkpoint header: " + path);
  }
  const auto& nj = header.at("net");
  const int d = nj.at("context_dim").get<int>();
  const int k = nj.at("num_actions").get<int>();
  const int h = nj.at("hidden_width").get<int>();
  const double drop = nj.at("dropout").get<double>();
  const auto& pj = header.at("posterior");
  const int pd = pj.at("context_dim").get<int>();
  const int pe = pj.at("embed_dim").get<int>();
  const int pk = pj.at("num_actions").get<int>();

  EmbeddingNet net(d, k, h, drop, 0);
  const std::size_t n_params = static_cast<std::size_t>(net.num_parameters());
  net.set_parameters(read_doubles(is, n_params));
  net.set_buffers(read_doubles(is, static_cast<std::size_t>(4 * h)));

  PosteriorModel posterior(pd, pe, pk);
  const std::size_t uf = static_cast<std::size_t>(pk) * (pd + pe);
  std::vector<double> uv = read_doubles(is, uf);
  std::vector<double> cv = read_doubles(is, static_cast<std::size_t>(pk));
  if (!is) throw DataError("truncated checkpoint payload: " + path);
  Eigen::MatrixXd u(pk, pd + pe);
  for (int i = 0; i < pk; ++i) {
    for (int j = 0; j < pd + pe; ++j) {
      u(i, j) = uv[static_cast<std::size_t>(i) * (pd + pe) + j];
    }
  }
  Eigen::VectorXd c(pk);
  for (int i = 0; i < pk; ++i) c(i) = cv[static_cast<std::size_t>(i)];
  posterior.set_weights(std::move(u), std::move(c));
  return {std::move(net), std::move(posterior)};
}

}  // namespace cael::models
