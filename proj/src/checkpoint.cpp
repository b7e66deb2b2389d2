#include "layoutgen/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "json.hpp"

#include "layoutgen/error.hpp"

namespace layoutgen {

using nlohmann::json;

namespace {

constexpr const char* kFormatName = "layoutgen-checkpoint";

template <typename T>
void write_le(std::ostream& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(bytes, bytes + sizeof(T));
  }
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T read_le(std::istream& in, const std::string& path) {
  unsigned char bytes[sizeof(T)];
  in.read(reinterpret_cast<char*>(bytes), sizeof(T));
  if (!in) throw FormatError("'" + path + "': truncated checkpoint");
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(bytes, bytes + sizeof(T));
  }
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

}  // namespace

void save_checkpoint(const std::string& path, const TrainedModel& model,
                     const NoiseSchedule& schedule,
                     std::uint64_t training_seed) {
  json arrays = json::array();
  for (const auto& e : model.params.entries()) {
    arrays.push_back({{"name", e.name}, {"shape", {e.rows, e.cols}}});
  }
  json relations = json::array();
  for (RelationType r : model.trained_relations) {
    relations.push_back(relation_name(r));
  }
  const json header = {
      {"format", kFormatName},
      {"schema_version", kCheckpointSchemaVersion},
      {"model",
       {{"width", model.config.width},
        {"position_frequencies", model.config.position_frequencies},
        {"aggregation",
         model.config.aggregation == Aggregation::kMean ? "mean" : "sum"}}},
      {"schedule",
       {{"steps", schedule.steps},
        {"beta_start", schedule.beta_start},
        {"beta_end", schedule.beta_end}}},
      {"training_seed", training_seed},
      {"trained_relations", relations},
      {"parameter_count", model.params.size()},
      {"arrays", arrays}};

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << header.dump() << '\n';
  for (std::size_t i = 0; i < model.params.entries().size(); ++i) {
    const auto& e = model.params.entry(i);
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(e.name.size()));
    out.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
    write_le<std::uint64_t>(out, e.size());
    for (float v : model.params.data(i)) write_le<float>(out, v);
  }
  if (!out) throw IoError("failed writing '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::string line;
  if (!std::getline(in, line)) throw FormatError("'" + path + "': empty file");
  json header;
  try {
    header = json::parse(line);
  } catch (const json::exception& e) {
    throw FormatError("'" + path + "': bad checkpoint header: " + e.what());
  }

  Checkpoint ck;
  try {
    if (header.at("format").get<std::string>() != kFormatName) {
      throw FormatError("'" + path + "' is not a layoutgen checkpoint");
    }
    const int version = header.at("schema_version").get<int>();
    if (version != kCheckpointSchemaVersion) {
      throw FormatError("'" + path + "': unsupported schema version " +
                        std::to_string(version));
    }
    ck.model.config.width = header.at("model").at("width").get<int>();
    ck.model.config.position_frequencies =
        header.at("model").at("position_frequencies").get<int>();
    const std::string agg = header.at("model").at("aggregation").get<std::string>();
    if (agg != "mean" && agg != "sum") {
      throw FormatError("'" + path + "': unknown aggregation '" + agg + "'");
    }
    ck.model.config.aggregation = agg == "mean" ? Aggregation::kMean : Aggregation::kSum;
    ck.model.config.validate();
    const auto& sched = header.at("schedule");
    ck.schedule = make_schedule(sched.at("steps").get<int>(),
                                sched.at("beta_start").get<double>(),
                                sched.at("beta_end").get<double>());
    ck.training_seed = header.at("training_seed").get<std::uint64_t>();
    for (const auto& r : header.at("trained_relations")) {
      ck.model.trained_relations.insert(relation_from_name(r.get<std::string>()));
    }
  } catch (const json::exception& e) {
    throw FormatError("'" + path + "': bad checkpoint header: " + e.what());
  } catch (const InvalidArgument& e) {
    throw FormatError("'" + path + "': " + e.what());
  }

  ModelParams expected = make_param_layout<float>(ck.model.config);
  const json& arrays = header.at("arrays");
  if (!arrays.is_array() || arrays.size() != expected.entries().size()) {
    throw FormatError("'" + path + "': header declares " +
                      std::to_string(arrays.size()) + " arrays, model needs " +
                      std::to_string(expected.entries().size()));
  }
  for (std::size_t i = 0; i < arrays.size(); ++i) {
    const auto& want = expected.entry(i);
    const std::string name = arrays[i].at("name").get<std::string>();
    const int rows = arrays[i].at("shape").at(0).get<int>();
    const int cols = arrays[i].at("shape").at(1).get<int>();
    if (name != want.name || rows != want.rows || cols != want.cols) {
      throw FormatError("'" + path + "': array " + std::to_string(i) + " is " +
                        name + " " + std::to_string(rows) + "x" +
                        std::to_string(cols) + ", expected " + want.name + " " +
                        std::to_string(want.rows) + "x" +
                        std::to_string(want.cols));
    }
  }
  for (std::size_t i = 0; i < expected.entries().size(); ++i) {
    const auto& want = expected.entry(i);
    const auto name_len = read_le<std::uint32_t>(in, path);
    if (name_len != want.name.size()) {
      throw FormatError("'" + path + "': unexpected array name length");
    }
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (!in || name != want.name) {
      throw FormatError("'" + path + "': expected array '" + want.name + "'");
    }
    const auto count = read_le<std::uint64_t>(in, path);
    if (count != want.size()) {
      throw FormatError("'" + path + "': array '" + name + "' has " +
                        std::to_string(count) + " values, expected " +
                        std::to_string(want.size()));
    }
    for (float& v : expected.data(i)) v = read_le<float>(in, path);
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw FormatError("'" + path + "': trailing bytes after last array");
  }
  ck.model.params = std::move(expected);
  return ck;
}

}  // namespace layoutgen
