#include <cmath>
#include <stdexcept>
#include <string>

#include "snndelay/data.hpp"

#ifdef SNNDELAY_HAVE_HDF5
#include <hdf5.h>
#endif

namespace snndelay {

#ifdef SNNDELAY_HAVE_HDF5

namespace {

/// Closes an HDF5 handle on scope exit.
class Handle {
 public:
  Handle(hid_t id, herr_t (*close)(hid_t), const std::string& what) : id_(id), close_(close) {
    if (id_ < 0) throw std::runtime_error("hdf5: cannot open " + what);
  }
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  ~Handle() { close_(id_); }
  hid_t get() const { return id_; }

 private:
  hid_t id_;
  herr_t (*close_)(hid_t);
};

std::size_t extent(hid_t dataset) {
  Handle space(H5Dget_space(dataset), H5Sclose, "dataspace");
  if (H5Sget_simple_extent_ndims(space.get()) != 1) {
    throw std::runtime_error("hdf5: expected a one-dimensional dataset");
  }
  hsize_t n = 0;
  H5Sget_simple_extent_dims(space.get(), &n, nullptr);
  return static_cast<std::size_t>(n);
}

/// Reads a 1-D variable-length dataset, converting elements to `elem_type`.
template <typename T>
std::vector<std::vector<T>> read_vlen(hid_t file, const char* name, hid_t elem_type) {
  Handle ds(H5Dopen2(file, name, H5P_DEFAULT), H5Dclose, name);
  const std::size_t n = extent(ds.get());
  Handle mem_type(H5Tvlen_create(elem_type), H5Tclose, "vlen type");
  std::vector<hvl_t> raw(n);
  if (H5Dread(ds.get(), mem_type.get(), H5S_ALL, H5S_ALL, H5P_DEFAULT, raw.data()) < 0) {
    throw std::runtime_error(std::string("hdf5: failed to read ") + name);
  }
  std::vector<std::vector<T>> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const T* p = static_cast<const T*>(raw[i].p);
    out[i].assign(p, p + raw[i].len);
  }
  Handle space(H5Dget_space(ds.get()), H5Sclose, "dataspace");
#if H5_VERSION_GE(1, 12, 0)
  H5Treclaim(mem_type.get(), space.get(), H5P_DEFAULT, raw.data());
#else
  H5Dvlen_reclaim(mem_type.get(), space.get(), H5P_DEFAULT, raw.data());
#endif
  return out;
}

}  // namespace

bool hdf5_supported() { return true; }

EventDataset read_hdf5_events(const std::filesystem::path& path, std::size_t c_raw,
                              std::size_t n_classes) {
  Handle file(H5Fopen(path.c_str(), H5F_ACC_RDONLY, H5P_DEFAULT), H5Fclose, path.string());
  const auto times = read_vlen<double>(file.get(), "spikes/times", H5T_NATIVE_DOUBLE);
  const auto units = read_vlen<unsigned short>(file.get(), "spikes/units", H5T_NATIVE_USHORT);

  Handle labels_ds(H5Dopen2(file.get(), "labels", H5P_DEFAULT), H5Dclose, "labels");
  std::vector<unsigned short> labels(extent(labels_ds.get()));
  if (H5Dread(labels_ds.get(), H5T_NATIVE_USHORT, H5S_ALL, H5S_ALL, H5P_DEFAULT, labels.data()) < 0) {
    throw std::runtime_error("hdf5: failed to read labels");
  }
  if (times.size() != units.size() || times.size() != labels.size()) {
    throw std::runtime_error("hdf5: spikes/times, spikes/units and labels differ in length");
  }

  EventDataset data;
  data.c_raw = c_raw;
  data.n_classes = n_classes;
  data.samples.resize(times.size());
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (times[i].size() != units[i].size()) {
      throw std::runtime_error("hdf5: sample " + std::to_string(i) +
                               " has mismatched times/units lengths");
    }
    if (labels[i] >= n_classes) {
      throw std::runtime_error("hdf5: sample " + std::to_string(i) + " has unknown class label " +
                               std::to_string(labels[i]));
    }
    auto& sample = data.samples[i];
    sample.label = labels[i];
    sample.events.reserve(times[i].size());
    for (std::size_t k = 0; k < times[i].size(); ++k) {
      if (units[i][k] >= c_raw) {
        throw std::runtime_error("hdf5: sample " + std::to_string(i) + " has channel " +
                                 std::to_string(units[i][k]) + " >= " + std::to_string(c_raw));
      }
      const double us = std::llround(times[i][k] * 1e6);
      if (!(us >= 0.0)) throw std::runtime_error("hdf5: negative event time");
      sample.events.push_back({static_cast<std::uint32_t>(us), units[i][k]});
    }
  }
  return data;
}

#else

bool hdf5_supported() { return false; }

EventDataset read_hdf5_events(const std::filesystem::path& path, std::size_t, std::size_t) {
  throw std::runtime_error("hdf5: " + path.string() +
                           " is an HDF5 container but this build has no HDF5 support; "
                           "convert it to the interchange format first");
}

#endif

}  // namespace snndelay
