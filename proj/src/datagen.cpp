#include "allspark/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>

#include <json.hpp>

#include "allspark/stt1.hpp"

namespace allspark {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(const std::string& s) {
  std::size_t pos = 0;
  const double v = std::stod(s, &pos);
  if (pos != s.size()) throw IoError("bad numeric field: " + s);
  return v;
}

std::string sample_name(const DatasetSpec& spec, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "sample_%04zu", i);
  std::string base = buf;
  switch (spec.modality) {
    case Modality::Text:
    case Modality::Code:
      return base + ".txt";
    case Modality::Trajectory:
      return base + ".csv";
    case Modality::Table:
      return std::to_string(i);  // row index into table.csv
    default:
      return base + ".stt1";
  }
}

std::string target_name(const DatasetSpec& spec, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "target_%04zu", i);
  std::string base = buf;
  switch (spec.task) {
    case TaskKind::TrajectoryPredict:
      return base + ".csv";
    case TaskKind::TextGenerate:
      return base + ".txt";
    case TaskKind::Depth:
      return base + ".stt1";
    default:
      return "";
  }
}

// fixed linear form for the table target
double table_weight(std::size_t j) { return (static_cast<double>(j % 5) - 2.0) / 4.0; }

void add_blob(Tensor& img, std::size_t H, std::size_t W, std::size_t C, double cy, double cx, double sigma,
              const std::vector<double>& channel_gain, bool hwc) {
  for (std::size_t y = 0; y < H; ++y)
    for (std::size_t x = 0; x < W; ++x) {
      const double dy = static_cast<double>(y) - cy;
      const double dx = static_cast<double>(x) - cx;
      const double bump = 3.0 * std::exp(-(dy * dy + dx * dx) / (2.0 * sigma * sigma));
      for (std::size_t c = 0; c < C; ++c) {
        const std::size_t idx = hwc ? (y * W + x) * C + c : (c * H + y) * W + x;
        img.data[idx] += bump * channel_gain[c];
      }
    }
}

std::pair<double, double> blob_center(std::size_t cls, std::size_t H, std::size_t W, Rng& rng) {
  const double qy = (cls / 2 == 0) ? 0.0 : static_cast<double>(H) / 2.0;
  const double qx = (cls % 2 == 0) ? 0.0 : static_cast<double>(W) / 2.0;
  const double jy = rng.uniform(-static_cast<double>(H) / 16.0, static_cast<double>(H) / 16.0);
  const double jx = rng.uniform(-static_cast<double>(W) / 16.0, static_cast<double>(W) / 16.0);
  return {qy + static_cast<double>(H) / 4.0 + jy, qx + static_cast<double>(W) / 4.0 + jx};
}

std::vector<double> gains(std::size_t C, Rng& rng) {
  std::vector<double> g(C);
  for (auto& v : g) v = rng.uniform(0.6, 1.0);
  return g;
}

ModalitySample make_image_sample(const DatasetSpec& spec, std::size_t cls, Rng& rng) {
  ModalitySample s;
  s.tag = spec.modality;
  switch (spec.modality) {
    case Modality::Rgb:
    case Modality::Msi:
    case Modality::Sar: {
      const std::size_t C = spec.modality == Modality::Rgb ? 3 : (spec.modality == Modality::Msi ? spec.channels : 2);
      s.array = Tensor::make({spec.h, spec.w, C}, Dtype::F32, false);
      for (auto& v : s.array->data) v = rng.normal(0.0, 0.1);
      auto [cy, cx] = blob_center(cls, spec.h, spec.w, rng);
      add_blob(*s.array, spec.h, spec.w, C, cy, cx, static_cast<double>(spec.h) / 8.0, gains(C, rng), true);
      s.array->quantize();
      break;
    }
    case Modality::Infrared: {
      s.array = Tensor::make({2, spec.h, spec.w, 3}, Dtype::F32, false);
      for (auto& v : s.array->data) v = rng.normal(0.0, 0.1);
      auto [cy, cx] = blob_center(cls, spec.h, spec.w, rng);
      for (std::size_t which = 0; which < 2; ++which) {
        auto g = gains(3, rng);
        for (std::size_t y = 0; y < spec.h; ++y)
          for (std::size_t x = 0; x < spec.w; ++x) {
            const double dy = static_cast<double>(y) - cy;
            const double dx = static_cast<double>(x) - cx;
            const double bump = 3.0 * std::exp(-(dy * dy + dx * dx) / (2.0 * std::pow(spec.h / 8.0, 2)));
            for (std::size_t c = 0; c < 3; ++c)
              s.array->data[((which * spec.h + y) * spec.w + x) * 3 + c] += bump * g[c];
          }
      }
      s.array->quantize();
      break;
    }
    case Modality::Video: {
      s.array = Tensor::make({spec.t_frames, 3, spec.h, spec.w}, Dtype::F32, false);
      for (auto& v : s.array->data) v = rng.normal(0.0, 0.1);
      auto [cy, cx] = blob_center(cls, spec.h, spec.w, rng);
      for (std::size_t t = 0; t < spec.t_frames; ++t) {
        auto g = gains(3, rng);
        for (std::size_t y = 0; y < spec.h; ++y)
          for (std::size_t x = 0; x < spec.w; ++x) {
            const double dy = static_cast<double>(y) - cy;
            const double dx = static_cast<double>(x) - cx;
            const double bump = 3.0 * std::exp(-(dy * dy + dx * dx) / (2.0 * std::pow(spec.h / 8.0, 2)));
            for (std::size_t c = 0; c < 3; ++c)
              s.array->data[((t * 3 + c) * spec.h + y) * spec.w + x] += bump * g[c];
          }
      }
      s.array->quantize();
      break;
    }
    default:
      throw ContractError("not an image modality");
  }
  return s;
}

const char* kFiller[] = {"the", "a", "quiet", "long", "evening", "story", "scene", "plot", "music", "ending"};

}  // namespace

DatasetSpec default_dataset_spec(Modality m, TaskKind task) {
  DatasetSpec spec;
  spec.modality = m;
  spec.task = task;
  switch (m) {
    case Modality::Text: spec.classes = 2; break;
    case Modality::PointCloud: spec.classes = 3; break;
    case Modality::Rgb: spec.h = spec.w = 32; break;
    default: break;
  }
  if (m == Modality::Msi || m == Modality::Sar || m == Modality::Infrared || m == Modality::Video ||
      m == Modality::Oblique) {
    spec.h = spec.w = 16;
  }
  return spec;
}

std::string dataset_spec_to_json(const DatasetSpec& s) {
  json j;
  j["modality"] = modality_name(s.modality);
  j["task"] = task_name(s.task);
  j["classes"] = s.classes;
  j["count"] = s.count;
  j["seed"] = s.seed;
  j["noise"] = s.noise;
  j["h"] = s.h;
  j["w"] = s.w;
  j["channels"] = s.channels;
  j["hsi_bands"] = s.hsi_bands;
  j["k_points"] = s.k_points;
  j["l_obs"] = s.l_obs;
  j["t_pred"] = s.t_pred;
  j["t_frames"] = s.t_frames;
  j["views"] = s.views;
  j["nodes"] = s.nodes;
  j["node_dim"] = s.node_dim;
  j["columns"] = s.columns;
  j["out_h"] = s.out_h;
  j["out_w"] = s.out_w;
  return j.dump();
}

DatasetSpec dataset_spec_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ContractError(std::string("bad dataset spec json: ") + e.what());
  }
  DatasetSpec s;
  s.modality = modality_from_name(j.at("modality"));
  s.task = task_from_name(j.at("task"));
  s.classes = j.value("classes", s.classes);
  s.count = j.value("count", s.count);
  s.seed = j.value("seed", s.seed);
  s.noise = j.value("noise", s.noise);
  s.h = j.value("h", s.h);
  s.w = j.value("w", s.w);
  s.channels = j.value("channels", s.channels);
  s.hsi_bands = j.value("hsi_bands", s.hsi_bands);
  s.k_points = j.value("k_points", s.k_points);
  s.l_obs = j.value("l_obs", s.l_obs);
  s.t_pred = j.value("t_pred", s.t_pred);
  s.t_frames = j.value("t_frames", s.t_frames);
  s.views = j.value("views", s.views);
  s.nodes = j.value("nodes", s.nodes);
  s.node_dim = j.value("node_dim", s.node_dim);
  s.columns = j.value("columns", s.columns);
  s.out_h = j.value("out_h", s.out_h);
  s.out_w = j.value("out_w", s.out_w);
  return s;
}

Label planted_label(const DatasetSpec& spec, const ModalitySample& s) {
  Label label;
  switch (spec.task) {
    case TaskKind::Classify: {
      switch (spec.modality) {
        case Modality::Text: {
          label.class_id = s.text.find("good") != std::string::npos ? 1 : 0;
          return label;
        }
        case Modality::Hsi: {
          const std::size_t C = s.array->dims[2];
          std::size_t best = 0;
          for (std::size_t b = 1; b < C; ++b) {
            if (s.array->data[b] > s.array->data[best]) best = b;
          }
          label.class_id = best * spec.classes / C;
          return label;
        }
        case Modality::PointCloud: {
          const std::size_t K = s.array->dims[0], stride = s.array->dims[1];
          double mean_r2 = 0.0, mean_rinf = 0.0, mean_az = 0.0;
          std::vector<double> r2(K), rinf(K);
          for (std::size_t i = 0; i < K; ++i) {
            const double x = s.array->data[i * stride], y = s.array->data[i * stride + 1],
                         z = s.array->data[i * stride + 2];
            r2[i] = std::sqrt(x * x + y * y + z * z);
            rinf[i] = std::max({std::abs(x), std::abs(y), std::abs(z)});
            mean_r2 += r2[i];
            mean_rinf += rinf[i];
            mean_az += std::abs(z);
          }
          mean_r2 /= K;
          mean_rinf /= K;
          mean_az /= K;
          double res_sphere = 0.0, res_cube = 0.0;
          for (std::size_t i = 0; i < K; ++i) {
            res_sphere += std::abs(r2[i] - mean_r2);
            res_cube += std::abs(rinf[i] - mean_rinf);
          }
          res_sphere /= K;
          res_cube /= K;
          const double res_plane = mean_az;
          if (res_sphere <= res_cube && res_sphere <= res_plane)
            label.class_id = 0;
          else if (res_cube <= res_plane)
            label.class_id = 1;
          else
            label.class_id = 2;
          return label;
        }
        default: {
          // quadrant of dominant energy over all channels/frames
          std::size_t H, W;
          bool hwc = true;
          std::size_t planes = 1, C = 1;
          if (s.tag == Modality::Video) {
            H = s.array->dims[2];
            W = s.array->dims[3];
            planes = s.array->dims[0] * s.array->dims[1];
            hwc = false;
          } else if (s.tag == Modality::Infrared) {
            H = s.array->dims[1];
            W = s.array->dims[2];
            planes = 2;
            C = 3;
          } else {
            H = s.array->dims[0];
            W = s.array->dims[1];
            C = s.array->dims[2];
          }
          double energy[4] = {0, 0, 0, 0};
          auto bucket = [&](std::size_t y, std::size_t x) {
            return (y < H / 2 ? 0 : 2) + (x < W / 2 ? 0 : 1);
          };
          if (s.tag == Modality::Video) {
            for (std::size_t p = 0; p < planes; ++p)
              for (std::size_t y = 0; y < H; ++y)
                for (std::size_t x = 0; x < W; ++x) {
                  const double v = s.array->data[(p * H + y) * W + x];
                  energy[bucket(y, x)] += v * v;
                }
          } else if (s.tag == Modality::Infrared) {
            for (std::size_t p = 0; p < planes; ++p)
              for (std::size_t y = 0; y < H; ++y)
                for (std::size_t x = 0; x < W; ++x)
                  for (std::size_t c = 0; c < C; ++c) {
                    const double v = s.array->data[((p * H + y) * W + x) * C + c];
                    energy[bucket(y, x)] += v * v;
                  }
          } else {
            (void)hwc;
            for (std::size_t y = 0; y < H; ++y)
              for (std::size_t x = 0; x < W; ++x)
                for (std::size_t c = 0; c < C; ++c) {
                  const double v = s.array->data[(y * W + x) * C + c];
                  energy[bucket(y, x)] += v * v;
                }
          }
          std::size_t best = 0;
          for (std::size_t q = 1; q < 4; ++q) {
            if (energy[q] > energy[best]) best = q;
          }
          label.class_id = best;
          return label;
        }
      }
    }
    case TaskKind::Regress: {
      if (spec.modality == Modality::Table) {
        double acc = 0.0;
        for (std::size_t j = 0; j < s.array->dims[1]; ++j) acc += table_weight(j) * s.array->data[j];
        label.value = acc;
        return label;
      }
      if (spec.modality == Modality::Graph) {
        double acc = 0.0;
        for (double v : s.array->data) acc += v;
        label.value = acc / static_cast<double>(s.array->numel());
        return label;
      }
      throw ContractError("regress rule undefined for this modality");
    }
    case TaskKind::TrajectoryPredict: {
      const std::size_t l = s.array->dims[0];
      if (l < 2) throw ContractError("trajectory rule needs at least two observed points");
      label.grid = Tensor::make({spec.t_pred, 2}, Dtype::F32, false);
      for (std::size_t k = 1; k <= spec.t_pred; ++k)
        for (std::size_t c = 0; c < 2; ++c) {
          const double last = s.array->data[(l - 1) * 2 + c];
          const double prev = s.array->data[(l - 2) * 2 + c];
          label.grid->data[(k - 1) * 2 + c] = last + static_cast<double>(k) * (last - prev);
        }
      label.grid->quantize();
      return label;
    }
    case TaskKind::TextGenerate: {
      const auto pos = s.text.find("return a ");
      if (pos == std::string::npos) throw ContractError("code rule: payload has no return expression");
      const char op = s.text[pos + 9];
      label.text = op == '+' ? "a plus b" : op == '-' ? "a minus b" : "a times b";
      return label;
    }
    case TaskKind::Depth: {
      const std::size_t H = s.array->dims[2], W = s.array->dims[3];
      if (H % spec.out_h != 0 || W % spec.out_w != 0) throw ContractError("depth rule: grid must divide image");
      const std::size_t bh = H / spec.out_h, bw = W / spec.out_w;
      label.grid = Tensor::make({spec.out_h, spec.out_w}, Dtype::F32, false);
      for (std::size_t gy = 0; gy < spec.out_h; ++gy)
        for (std::size_t gx = 0; gx < spec.out_w; ++gx) {
          double acc = 0.0;
          for (std::size_t y = 0; y < bh; ++y)
            for (std::size_t x = 0; x < bw; ++x) acc += s.array->data[(gy * bh + y) * W + gx * bw + x];
          label.grid->data[gy * spec.out_w + gx] = acc / static_cast<double>(bh * bw);
        }
      label.grid->quantize();
      return label;
    }
  }
  throw ContractError("bad task");
}

namespace {

struct Generated {
  std::vector<ModalitySample> samples;
  std::vector<Label> labels;
  std::vector<ColumnSpec> columns;
};

Generated make_samples(const DatasetSpec& spec) {
  Generated out;
  Rng rng(spec.seed);
  for (std::size_t i = 0; i < spec.count; ++i) {
    ModalitySample s;
    s.tag = spec.modality;
    switch (spec.modality) {
      case Modality::Rgb:
      case Modality::Msi:
      case Modality::Sar:
      case Modality::Infrared:
      case Modality::Video: {
        const std::size_t cls = rng.below(spec.classes > 4 ? 4 : spec.classes);
        s = make_image_sample(spec, cls, rng);
        break;
      }
      case Modality::Hsi: {
        const std::size_t cls = rng.below(spec.classes);
        const std::size_t C = spec.hsi_bands;
        s.array = Tensor::make({1, 1, C}, Dtype::F32, false);
        for (std::size_t b = 0; b < C; ++b)
          s.array->data[b] = 0.2 * std::sin(0.1 * static_cast<double>(b)) + rng.normal(0.0, 0.05);
        const std::size_t lo = cls * C / spec.classes + 2;
        const std::size_t hi = (cls + 1) * C / spec.classes - 2;
        const std::size_t peak = lo + rng.below(hi - lo);
        s.array->data[peak] += 3.0;
        s.array->quantize();
        break;
      }
      case Modality::PointCloud: {
        const std::size_t cls = rng.below(3);
        s.array = Tensor::make({spec.k_points, 3}, Dtype::F32, false);
        for (std::size_t p = 0; p < spec.k_points; ++p) {
          double x = 0, y = 0, z = 0;
          if (cls == 0) {  // unit sphere
            do {
              x = rng.normal(0.0, 1.0);
              y = rng.normal(0.0, 1.0);
              z = rng.normal(0.0, 1.0);
            } while (x * x + y * y + z * z < 1e-12);
            const double r = std::sqrt(x * x + y * y + z * z);
            x /= r;
            y /= r;
            z /= r;
          } else if (cls == 1) {  // cube surface, half-size 1
            const std::size_t face = rng.below(6);
            const double u = rng.uniform(-1.0, 1.0), v = rng.uniform(-1.0, 1.0);
            const double w = face % 2 == 0 ? 1.0 : -1.0;
            if (face / 2 == 0) { x = w; y = u; z = v; }
            else if (face / 2 == 1) { x = u; y = w; z = v; }
            else { x = u; y = v; z = w; }
          } else {  // plane z = 0
            x = rng.uniform(-1.0, 1.0);
            y = rng.uniform(-1.0, 1.0);
            z = 0.0;
          }
          s.array->data[p * 3] = x + rng.normal(0.0, spec.noise);
          s.array->data[p * 3 + 1] = y + rng.normal(0.0, spec.noise);
          s.array->data[p * 3 + 2] = z + rng.normal(0.0, spec.noise);
        }
        s.array->quantize();
        break;
      }
      case Modality::Text: {
        const std::size_t cls = rng.below(2);
        const std::size_t words = 4 + rng.below(4);
        const std::size_t slot = rng.below(words);
        std::string text;
        for (std::size_t wI = 0; wI < words; ++wI) {
          if (!text.empty()) text += ' ';
          if (wI == slot)
            text += cls == 1 ? "good" : "bad";
          else
            text += kFiller[rng.below(10)];
        }
        s.text = text;
        break;
      }
      case Modality::Code: {
        const std::size_t op = rng.below(3);
        const char sym = op == 0 ? '+' : op == 1 ? '-' : '*';
        s.text = "fn f" + std::to_string(i) + "(a, b) { return a " + sym + " b; }";
        break;
      }
      case Modality::Table: {
        s.array = Tensor::make({1, spec.columns}, Dtype::F32, false);
        for (std::size_t j = 0; j < spec.columns; ++j) {
          if (j == 0)
            s.array->data[j] = static_cast<double>(rng.below(24));
          else if (j == 1)
            s.array->data[j] = static_cast<double>(rng.below(12));
          else
            s.array->data[j] = rng.normal(0.0, 1.0);
        }
        s.array->quantize();
        break;
      }
      case Modality::Trajectory: {
        s.array = Tensor::make({spec.l_obs, 2}, Dtype::F32, false);
        const double p0x = rng.normal(0.0, 1.0), p0y = rng.normal(0.0, 1.0);
        const double vx = rng.normal(0.0, 0.5), vy = rng.normal(0.0, 0.5);
        for (std::size_t t = 0; t < spec.l_obs; ++t) {
          s.array->data[t * 2] = p0x + vx * static_cast<double>(t) + rng.normal(0.0, spec.noise);
          s.array->data[t * 2 + 1] = p0y + vy * static_cast<double>(t) + rng.normal(0.0, spec.noise);
        }
        s.array->quantize();
        break;
      }
      case Modality::Graph: {
        s.array = Tensor::make({spec.nodes, spec.node_dim}, Dtype::F32, false);
        for (auto& v : s.array->data) v = rng.normal(0.0, 1.0);
        s.array->quantize();
        s.graph_timestep = i % 32;
        break;
      }
      case Modality::Oblique: {
        s.array = Tensor::make({spec.views, 3, spec.h, spec.w}, Dtype::F32, false);
        // view 0: three smooth bumps; other views: view 0 plus noise
        std::vector<std::array<double, 3>> bumps(3);
        for (auto& b : bumps) b = {rng.uniform(0, spec.h), rng.uniform(0, spec.w), rng.uniform(0.5, 2.0)};
        for (std::size_t c = 0; c < 3; ++c)
          for (std::size_t y = 0; y < spec.h; ++y)
            for (std::size_t x = 0; x < spec.w; ++x) {
              double v = rng.normal(0.0, 0.05);
              for (auto& b : bumps) {
                const double dy = static_cast<double>(y) - b[0], dx = static_cast<double>(x) - b[1];
                v += b[2] * std::exp(-(dy * dy + dx * dx) / (2.0 * 9.0));
              }
              s.array->data[(c * spec.h + y) * spec.w + x] = v;
            }
        for (std::size_t view = 1; view < spec.views; ++view)
          for (std::size_t p = 0; p < 3 * spec.h * spec.w; ++p)
            s.array->data[view * 3 * spec.h * spec.w + p] = s.array->data[p] + rng.normal(0.0, 0.2);
        s.array->quantize();
        break;
      }
    }
    out.samples.push_back(s);
    out.labels.push_back(planted_label(spec, s));
  }
  if (spec.modality == Modality::Table) {
    // fit 16-bin quantile edges on the generated training data
    out.columns.resize(spec.columns);
    out.columns[0] = ColumnSpec{true, 24, {}};
    out.columns[1] = ColumnSpec{true, 12, {}};
    for (std::size_t j = 2; j < spec.columns; ++j) {
      std::vector<double> vals;
      for (const auto& s : out.samples) vals.push_back(s.array->data[j]);
      std::sort(vals.begin(), vals.end());
      ColumnSpec col;
      col.discrete = false;
      for (std::size_t q = 1; q < 16; ++q) {
        const std::size_t idx = std::min(vals.size() - 1, q * vals.size() / 16);
        col.bin_edges.push_back(vals[idx]);
      }
      out.columns[j] = col;
    }
  }
  return out;
}

std::string trajectory_csv(const Tensor& pts, std::size_t t0) {
  std::string csv = "agent_id,t,x,y\n";
  for (std::size_t t = 0; t < pts.dims[0]; ++t) {
    csv += "0," + std::to_string(t0 + t) + "," + fmt_double(pts.data[t * 2]) + "," + fmt_double(pts.data[t * 2 + 1]) +
           "\n";
  }
  return csv;
}

TensorPtr trajectory_from_csv(const std::string& csv, const std::string& what) {
  std::vector<double> xs, ys;
  std::size_t pos = 0;
  bool header = true;
  while (pos < csv.size()) {
    auto eol = csv.find('\n', pos);
    if (eol == std::string::npos) eol = csv.size();
    const std::string line = csv.substr(pos, eol - pos);
    pos = eol + 1;
    if (line.empty()) continue;
    if (header) {
      if (line != "agent_id,t,x,y") throw IoError(what + ": bad trajectory header: " + line);
      header = false;
      continue;
    }
    std::vector<std::string> fields;
    std::size_t fp = 0;
    while (true) {
      auto comma = line.find(',', fp);
      fields.push_back(line.substr(fp, comma == std::string::npos ? std::string::npos : comma - fp));
      if (comma == std::string::npos) break;
      fp = comma + 1;
    }
    if (fields.size() != 4) throw IoError(what + ": bad trajectory row: " + line);
    xs.push_back(parse_double(fields[2]));
    ys.push_back(parse_double(fields[3]));
  }
  auto t = Tensor::make({xs.size(), 2}, Dtype::F32, false);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    t->data[i * 2] = xs[i];
    t->data[i * 2 + 1] = ys[i];
  }
  t->quantize();
  return t;
}

}  // namespace

LoadedDataset synthesize_dataset(const DatasetSpec& spec) {
  auto gen = make_samples(spec);
  LoadedDataset out;
  out.spec = spec;
  out.samples = std::move(gen.samples);
  out.labels = std::move(gen.labels);
  out.table_columns = std::move(gen.columns);
  return out;
}

std::string fnv1a64_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void generate_dataset(const DatasetSpec& spec, const std::string& dir) {
  auto gen = make_samples(spec);
  fs::create_directories(dir);
  std::map<std::string, std::string> files;  // name -> bytes

  std::string labels_csv = "sample,label\n";
  std::string table_csv;
  if (spec.modality == Modality::Table) {
    for (std::size_t j = 0; j < spec.columns; ++j) table_csv += (j ? "," : "") + ("col" + std::to_string(j));
    table_csv += "\n";
  }
  for (std::size_t i = 0; i < gen.samples.size(); ++i) {
    const auto& s = gen.samples[i];
    const auto& label = gen.labels[i];
    const std::string sname = sample_name(spec, i);
    switch (spec.modality) {
      case Modality::Text:
      case Modality::Code:
        files[sname] = s.text;
        break;
      case Modality::Trajectory:
        files[sname] = trajectory_csv(*s.array, 0);
        break;
      case Modality::Table:
        for (std::size_t j = 0; j < spec.columns; ++j) table_csv += (j ? "," : "") + fmt_double(s.array->data[j]);
        table_csv += "\n";
        break;
      default:
        files[sname] = stt1_encode(*s.array);
        break;
    }
    switch (spec.task) {
      case TaskKind::Classify:
        labels_csv += sname + "," + std::to_string(label.class_id) + "\n";
        break;
      case TaskKind::Regress:
        labels_csv += sname + "," + fmt_double(label.value) + "\n";
        break;
      case TaskKind::TrajectoryPredict: {
        const std::string tname = target_name(spec, i);
        files[tname] = trajectory_csv(*label.grid, spec.l_obs);
        labels_csv += sname + "," + tname + "\n";
        break;
      }
      case TaskKind::TextGenerate: {
        const std::string tname = target_name(spec, i);
        files[tname] = label.text;
        labels_csv += sname + "," + tname + "\n";
        break;
      }
      case TaskKind::Depth: {
        const std::string tname = target_name(spec, i);
        files[tname] = stt1_encode(*label.grid);
        labels_csv += sname + "," + tname + "\n";
        break;
      }
    }
  }
  if (spec.modality == Modality::Table) files["table.csv"] = table_csv;
  files["labels.csv"] = labels_csv;

  json manifest;
  manifest["spec"] = json::parse(dataset_spec_to_json(spec));
  json hashes = json::object();
  for (const auto& [name, bytes] : files) hashes[name] = fnv1a64_hex(bytes);
  manifest["hashes"] = hashes;
  if (spec.modality == Modality::Table) {
    json cols = json::array();
    for (const auto& c : gen.columns) {
      cols.push_back({{"discrete", c.discrete}, {"vocab", c.vocab}, {"bin_edges", c.bin_edges}});
    }
    manifest["columns"] = cols;
  }
  for (const auto& [name, bytes] : files) write_file_atomic(dir + "/" + name, bytes);
  write_file_atomic(dir + "/manifest.json", manifest.dump(2) + "\n");
}

LoadedDataset load_dataset(const std::string& dir) {
  json manifest;
  try {
    manifest = json::parse(read_file(dir + "/manifest.json"));
  } catch (const json::exception& e) {
    throw IoError("bad dataset manifest in " + dir + ": " + e.what());
  }
  LoadedDataset out;
  out.spec = dataset_spec_from_json(manifest.at("spec").dump());
  for (auto& [name, hash] : manifest.at("hashes").items()) {
    const std::string bytes = read_file(dir + "/" + name);
    if (fnv1a64_hex(bytes) != hash.get<std::string>()) {
      throw IoError("dataset file " + name + " does not match its manifest hash");
    }
  }
  if (manifest.contains("columns")) {
    for (const auto& c : manifest.at("columns")) {
      ColumnSpec col;
      col.discrete = c.at("discrete");
      col.vocab = c.at("vocab");
      col.bin_edges = c.at("bin_edges").get<std::vector<double>>();
      out.table_columns.push_back(col);
    }
  }

  // table rows live in one csv
  std::vector<std::vector<double>> table_rows;
  if (out.spec.modality == Modality::Table) {
    const std::string csv = read_file(dir + "/table.csv");
    std::size_t pos = 0;
    bool header = true;
    while (pos < csv.size()) {
      auto eol = csv.find('\n', pos);
      if (eol == std::string::npos) eol = csv.size();
      const std::string line = csv.substr(pos, eol - pos);
      pos = eol + 1;
      if (line.empty()) continue;
      if (header) {
        header = false;
        continue;
      }
      std::vector<double> row;
      std::size_t fp = 0;
      while (true) {
        auto comma = line.find(',', fp);
        row.push_back(parse_double(line.substr(fp, comma == std::string::npos ? std::string::npos : comma - fp)));
        if (comma == std::string::npos) break;
        fp = comma + 1;
      }
      table_rows.push_back(row);
    }
  }

  const std::string labels_csv = read_file(dir + "/labels.csv");
  std::size_t pos = 0;
  bool header = true;
  while (pos < labels_csv.size()) {
    auto eol = labels_csv.find('\n', pos);
    if (eol == std::string::npos) eol = labels_csv.size();
    const std::string line = labels_csv.substr(pos, eol - pos);
    pos = eol + 1;
    if (line.empty()) continue;
    if (header) {
      if (line != "sample,label") throw IoError("labels.csv: bad header: " + line);
      header = false;
      continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw IoError("labels.csv: bad row: " + line);
    const std::string sname = line.substr(0, comma);
    const std::string lfield = line.substr(comma + 1);

    ModalitySample s;
    s.tag = out.spec.modality;
    switch (out.spec.modality) {
      case Modality::Text:
      case Modality::Code:
        s.text = read_file(dir + "/" + sname);
        break;
      case Modality::Trajectory:
        s.array = trajectory_from_csv(read_file(dir + "/" + sname), sname);
        break;
      case Modality::Table: {
        const std::size_t row = std::stoul(sname);
        if (row >= table_rows.size()) throw IoError("labels.csv: row " + sname + " outside table.csv");
        s.array = Tensor::make({1, table_rows[row].size()}, Dtype::F32, false);
        s.array->data = table_rows[row];
        s.array->quantize();
        break;
      }
      default:
        s.array = stt1_read(dir + "/" + sname);
        break;
    }
    if (out.spec.modality == Modality::Graph) s.graph_timestep = out.samples.size() % 32;

    Label label;
    switch (out.spec.task) {
      case TaskKind::Classify:
        label.class_id = std::stoul(lfield);
        break;
      case TaskKind::Regress:
        label.value = parse_double(lfield);
        break;
      case TaskKind::TrajectoryPredict:
        label.grid = trajectory_from_csv(read_file(dir + "/" + lfield), lfield);
        break;
      case TaskKind::TextGenerate:
        label.text = read_file(dir + "/" + lfield);
        break;
      case TaskKind::Depth:
        label.grid = stt1_read(dir + "/" + lfield);
        break;
    }
    out.samples.push_back(std::move(s));
    out.labels.push_back(std::move(label));
  }
  return out;
}

}  // namespace allspark
