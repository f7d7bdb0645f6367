#include "rpg/checkpoint.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace rpg {

void Checkpoint::add(const std::string& name, std::span<const double> data,
                     std::vector<size_t> shape) {
  if (name.empty() || name.find(' ') != std::string::npos) {
    throw std::invalid_argument("checkpoint names must be non-empty, no spaces");
  }
  if (find(name) != nullptr) {
    throw std::invalid_argument("duplicate checkpoint entry: " + name);
  }
  if (shape.empty()) shape = {data.size()};
  size_t total = 1;
  for (size_t s : shape) total *= s;
  if (total != data.size()) {
    throw std::invalid_argument("shape does not match data size for " + name);
  }
  entries_.push_back({name, std::move(shape),
                      std::vector<double>(data.begin(), data.end())});
}

const Checkpoint::Entry* Checkpoint::find(const std::string& name) const {
  for (const Entry& e : entries_) {
    if (e.name == name) return &e;
  }
  return nullptr;
}

std::span<const double> Checkpoint::get(const std::string& name) const {
  const Entry* e = find(name);
  if (e == nullptr) throw std::out_of_range("no checkpoint entry: " + name);
  return e->data;
}

void Checkpoint::save(const std::string& base_path) const {
  std::ofstream bin(base_path + ".bin", std::ios::binary);
  if (!bin) throw std::runtime_error("cannot write " + base_path + ".bin");
  std::ofstream man(base_path + ".manifest");
  if (!man) throw std::runtime_error("cannot write " + base_path + ".manifest");

  size_t offset = 0;
  for (const Entry& e : entries_) {
    bin.write(reinterpret_cast<const char*>(e.data.data()),
              static_cast<std::streamsize>(e.data.size() * sizeof(double)));
    man << e.name;
    for (size_t s : e.shape) man << " " << s;
    man << " @" << offset << " " << e.data.size() << "\n";
    offset += e.data.size();
  }
  if (!bin || !man) throw std::runtime_error("checkpoint write failed");
}

Checkpoint Checkpoint::load(const std::string& base_path) {
  std::ifstream man(base_path + ".manifest");
  if (!man) throw std::runtime_error("cannot read " + base_path + ".manifest");
  std::ifstream bin(base_path + ".bin", std::ios::binary);
  if (!bin) throw std::runtime_error("cannot read " + base_path + ".bin");

  Checkpoint ck;
  std::string line;
  while (std::getline(man, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string name;
    ss >> name;
    std::vector<size_t> shape;
    std::string tok;
    size_t offset = 0, count = 0;
    while (ss >> tok) {
      if (tok.front() == '@') {
        offset = std::stoull(tok.substr(1));
        ss >> count;
        break;
      }
      shape.push_back(std::stoull(tok));
    }
    std::vector<double> data(count);
    bin.seekg(static_cast<std::streamoff>(offset * sizeof(double)));
    bin.read(reinterpret_cast<char*>(data.data()),
             static_cast<std::streamsize>(count * sizeof(double)));
    if (!bin) throw std::runtime_error("truncated checkpoint data for " + name);
    ck.add(name, data, shape);
  }
  return ck;
}

}  // namespace rpg
