// Python bindings. Python closures run as local ranks: each rank thread takes
// the GIL to run user code and every blocking runtime call releases it.

#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>

#include "mpignite/cluster.hpp"
#include "mpignite/examples.hpp"
#include "mpignite/log.hpp"

namespace py = pybind11;
using namespace mpignite;

namespace {

// ---- value conversion ----

py::object to_py(const Value& v) {
  return std::visit(
      [](const auto& x) -> py::object {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, Unit>) {
          return py::none();
        } else if constexpr (std::is_same_v<T, Bytes>) {
          return py::bytes(reinterpret_cast<const char*>(x.data()), x.size());
        } else if constexpr (std::is_same_v<T, std::vector<Bytes>>) {
          py::list out;
          for (const auto& b : x) out.append(py::bytes(reinterpret_cast<const char*>(b.data()), b.size()));
          return out;
        } else if constexpr (std::is_same_v<T, std::vector<bool>>) {
          py::list out;
          for (bool b : x) out.append(py::bool_(b));
          return out;
        } else {
          return py::cast(x);
        }
      },
      v);
}

Bytes bytes_of(const py::handle& h) {
  const auto s = h.cast<std::string>();
  return Bytes(s.begin(), s.end());
}

// Infers the kind of a Python object: int -> i64, float -> f64, and lists
// from their first element (an empty list is an empty i64 array).
Kind infer_kind(const py::handle& obj) {
  if (obj.is_none()) return Kind::kUnit;
  if (py::isinstance<py::bool_>(obj)) return Kind::kBool;
  if (py::isinstance<py::int_>(obj)) return Kind::kI64;
  if (py::isinstance<py::float_>(obj)) return Kind::kF64;
  if (py::isinstance<py::str>(obj)) return Kind::kString;
  if (py::isinstance<py::bytes>(obj) || py::isinstance<py::bytearray>(obj)) return Kind::kBytes;
  if (py::isinstance<py::list>(obj) || py::isinstance<py::tuple>(obj)) {
    const auto seq = py::reinterpret_borrow<py::sequence>(obj);
    if (seq.size() == 0) return Kind::kI64Array;
    const Kind first = infer_kind(seq[0]);
    if (auto a = array_kind_of(first)) return *a;
  }
  throw Error(ErrorCode::kEncodeUnsupported,
              "cannot encode a Python " + std::string(py::str(py::type::of(obj).attr("__name__"))));
}

template <class T>
std::vector<T> seq_of(const py::handle& obj) {
  std::vector<T> out;
  for (auto item : py::reinterpret_borrow<py::sequence>(obj)) out.push_back(item.cast<T>());
  return out;
}

Value from_py(const py::handle& obj, std::optional<Kind> kind) {
  const Kind k = kind ? *kind : infer_kind(obj);
  try {
    switch (k) {
      case Kind::kUnit:
        return Unit{};
      case Kind::kI32: {
        const auto v = obj.cast<std::int64_t>();
        if (v < INT32_MIN || v > INT32_MAX) throw Error(ErrorCode::kEncodeUnsupported, "value out of i32 range");
        return static_cast<std::int32_t>(v);
      }
      case Kind::kI64:
        return obj.cast<std::int64_t>();
      case Kind::kF64:
        return obj.cast<double>();
      case Kind::kBool:
        return obj.cast<bool>();
      case Kind::kString:
        return obj.cast<std::string>();
      case Kind::kBytes:
        return bytes_of(obj);
      case Kind::kI32Array:
        return seq_of<std::int32_t>(obj);
      case Kind::kI64Array:
        return seq_of<std::int64_t>(obj);
      case Kind::kF64Array:
        return seq_of<double>(obj);
      case Kind::kBoolArray:
        return seq_of<bool>(obj);
      case Kind::kStringArray:
        return seq_of<std::string>(obj);
      case Kind::kBytesArray: {
        std::vector<Bytes> out;
        for (auto item : py::reinterpret_borrow<py::sequence>(obj)) out.push_back(bytes_of(item));
        return out;
      }
    }
  } catch (const py::cast_error& e) {
    throw Error(ErrorCode::kEncodeUnsupported,
                "cannot encode value as " + std::string(to_string(k)) + ": " + e.what());
  }
  throw Error(ErrorCode::kEncodeUnsupported, "unknown kind");
}

Payload payload_of(const py::handle& obj, std::optional<Kind> kind) { return encode(from_py(obj, kind)); }

// Runs a Python callable with the GIL held, turning Python exceptions into
// C++ ones so they never cross a GIL-free frame.
template <class F>
auto with_gil(F&& f) {
  py::gil_scoped_acquire gil;
  try {
    return f();
  } catch (py::error_already_set& e) {
    throw std::runtime_error(e.what());
  }
}

// Owns a Python object from threads that may not hold the GIL.
std::shared_ptr<py::object> shared_object(py::object obj) {
  return std::shared_ptr<py::object>(new py::object(std::move(obj)), [](py::object* p) {
    py::gil_scoped_acquire gil;
    delete p;
  });
}

class PyFuture {
 public:
  explicit PyFuture(Future<Value> f) : f_(std::move(f)) {}

  bool ready() const { return f_.ready(); }

  py::object await() const {
    Value v;
    {
      py::gil_scoped_release release;
      v = f_.await();
    }
    return to_py(v);
  }

  void on_complete(py::object on_success, py::object on_failure) const {
    auto ok = shared_object(std::move(on_success));
    auto bad = shared_object(std::move(on_failure));
    f_.on_complete(
        [ok](const Value& v) {
          py::gil_scoped_acquire gil;
          try {
            if (!ok->is_none()) (*ok)(to_py(v));
          } catch (py::error_already_set& e) {
            e.discard_as_unraisable("mpignite on_complete callback");
          }
        },
        [bad](const Error& err) {
          py::gil_scoped_acquire gil;
          try {
            if (!bad->is_none()) (*bad)(py::str(err.what()));
          } catch (py::error_already_set& e) {
            e.discard_as_unraisable("mpignite on_complete callback");
          }
        });
  }

 private:
  Future<Value> f_;
};

std::vector<py::object> to_py_list(const std::vector<Value>& vs) {
  std::vector<py::object> out;
  out.reserve(vs.size());
  for (const auto& v : vs) out.push_back(to_py(v));
  return out;
}

std::vector<Value> collect_released(const JobHandle& h) {
  py::gil_scoped_release release;
  return collect_results(h);
}

JobOptions options_of(RoutingMode routing, const py::object& parameter, std::optional<Kind> parameter_kind) {
  JobOptions o;
  o.routing = routing;
  if (!parameter.is_none()) o.parameter = payload_of(parameter, parameter_kind);
  return o;
}

/// Local execution of Python closures.
class LocalContext {
 public:
  std::vector<py::object> run(py::function fn, std::uint32_t n, RoutingMode routing,
                              py::object parameter, std::optional<Kind> parameter_kind,
                              std::optional<Kind> result_kind) {
    // The driver blocks below until every rank finishes, so a borrowed
    // handle outlives all uses.
    PyObject* raw = fn.ptr();
    ParallelFunction pf{"", [raw, result_kind](Communicator& c) -> Value {
                          return with_gil([&] {
                            py::object r = py::handle(raw)(py::cast(&c, py::return_value_policy::reference));
                            return from_py(r, result_kind);
                          });
                        }};
    const auto opts = options_of(routing, parameter, parameter_kind);
    JobHandle h = [&] {
      py::gil_scoped_release release;
      return backend_.submit(pf, n, opts);
    }();
    return to_py_list(collect_released(h));
  }

 private:
  LocalBackend backend_;
};

Backend& backend_for(std::optional<LocalBackend>& local, std::unique_ptr<LoopbackCluster>& cluster,
                     const std::string& mode, std::uint32_t workers) {
  if (mode == "local") return local.emplace();
  if (mode == "cluster") {
    cluster = std::make_unique<LoopbackCluster>(examples::builtin_registry(), workers);
    return cluster->master();
  }
  throw Error(ErrorCode::kUsage, "mode must be 'local' or 'cluster'");
}

py::tuple run_example_py(const std::string& name, std::uint32_t n, RoutingMode routing,
                         const std::string& mode, std::uint32_t workers, py::object parameter) {
  std::optional<Payload> param;
  if (!parameter.is_none()) param = payload_of(parameter, Kind::kI32);
  examples::ExampleRun r;
  {
    py::gil_scoped_release release;
    std::optional<LocalBackend> local;
    std::unique_ptr<LoopbackCluster> cluster;
    Backend& b = backend_for(local, cluster, mode, workers);
    r = examples::run_example(b, name, n, routing, std::move(param));
  }
  return py::make_tuple(to_py_list(r.results), r.summary);
}

}  // namespace

PYBIND11_MODULE(_mpignite, m) {
  m.doc() = "Ranked parallel closures with an MPI-style communicator";

  auto error = py::register_exception<Error>(m, "MpigniteError", PyExc_RuntimeError);
  auto job_failure = py::register_exception<JobFailure>(m, "JobFailure", error.ptr());
  (void)job_failure;

  py::enum_<Kind>(m, "Kind")
      .value("UNIT", Kind::kUnit)
      .value("I32", Kind::kI32)
      .value("I64", Kind::kI64)
      .value("F64", Kind::kF64)
      .value("BOOL", Kind::kBool)
      .value("STRING", Kind::kString)
      .value("BYTES", Kind::kBytes)
      .value("I32_ARRAY", Kind::kI32Array)
      .value("I64_ARRAY", Kind::kI64Array)
      .value("F64_ARRAY", Kind::kF64Array)
      .value("BOOL_ARRAY", Kind::kBoolArray)
      .value("STRING_ARRAY", Kind::kStringArray)
      .value("BYTES_ARRAY", Kind::kBytesArray);

  py::enum_<RoutingMode>(m, "Routing")
      .value("P2P", RoutingMode::kP2P)
      .value("MASTER_RELAY", RoutingMode::kMasterRelay);

  py::enum_<FrameKind>(m, "FrameKind")
      .value("HELLO", FrameKind::kHello)
      .value("TASK_ASSIGN", FrameKind::kTaskAssign)
      .value("RESULT", FrameKind::kResult)
      .value("USER_MSG", FrameKind::kUserMsg)
      .value("ADDR_REQ", FrameKind::kAddrReq)
      .value("ADDR_REPLY", FrameKind::kAddrReply)
      .value("CTX_ALLOC_REQ", FrameKind::kCtxAllocReq)
      .value("CTX_ALLOC_REPLY", FrameKind::kCtxAllocReply)
      .value("SHUTDOWN", FrameKind::kShutdown)
      .value("JOB_DONE", FrameKind::kJobDone);

  m.def(
      "encode",
      [](py::object value, std::optional<Kind> kind) {
        const auto p = payload_of(value, kind);
        return py::bytes(reinterpret_cast<const char*>(p.bytes.data()), p.bytes.size());
      },
      py::arg("value"), py::arg("kind") = py::none(),
      "Encode a value; the kind is inferred when omitted (int -> I64).");
  m.def(
      "decode",
      [](py::bytes data, std::optional<Kind> kind) {
        auto p = payload_from_bytes(bytes_of(data));
        return to_py(decode(p, kind ? *kind : p.kind()));
      },
      py::arg("data"), py::arg("kind") = py::none(),
      "Decode a payload, checking its kind byte against `kind` when given.");

  m.def(
      "write_frame",
      [](FrameKind kind, py::bytes body) {
        const auto b = bytes_of(body);
        const auto out = write_frame(kind, b);
        return py::bytes(reinterpret_cast<const char*>(out.data()), out.size());
      },
      py::arg("kind"), py::arg("body"));
  m.def(
      "read_frame",
      [](py::bytes data) {
        const auto b = bytes_of(data);
        const Frame f = parse_frame(b);
        return py::make_tuple(f.kind, py::bytes(reinterpret_cast<const char*>(f.body.data()), f.body.size()));
      },
      py::arg("data"), "Parse exactly one frame into (kind, body).");

  m.def("set_log_level", [](const std::string& level) { log::set_level(level); });

  py::class_<PyFuture>(m, "Future")
      .def("ready", &PyFuture::ready)
      .def("await_", &PyFuture::await)
      .def("on_complete", &PyFuture::on_complete, py::arg("on_success"), py::arg("on_failure") = py::none());

  py::class_<Communicator>(m, "Communicator")
      .def_property_readonly("rank", &Communicator::rank)
      .def_property_readonly("size", &Communicator::size)
      .def_property_readonly("context_id", &Communicator::context_id)
      .def_property_readonly("members", &Communicator::members)
      .def("world_rank_of", &Communicator::world_rank_of)
      .def_property_readonly("job_parameter",
                             [](const Communicator& c) -> py::object {
                               const auto& p = c.job_parameter();
                               if (!p) return py::none();
                               return to_py(decode(*p, p->kind()));
                             })
      .def(
          "send",
          [](Communicator& c, int dst, int tag, py::object value, std::optional<Kind> kind) {
            Value v = from_py(value, kind);
            py::gil_scoped_release release;
            c.send(dst, tag, v);
          },
          py::arg("dst"), py::arg("tag"), py::arg("value"), py::arg("kind") = py::none())
      .def(
          "receive",
          [](Communicator& c, int src, int tag, Kind kind) {
            Value v;
            {
              py::gil_scoped_release release;
              v = c.receive(src, tag, kind);
            }
            return to_py(v);
          },
          py::arg("src"), py::arg("tag"), py::arg("kind") = Kind::kI64)
      .def(
          "receive_async",
          [](Communicator& c, int src, int tag, Kind kind) { return PyFuture(c.receive_async(src, tag, kind)); },
          py::arg("src"), py::arg("tag"), py::arg("kind") = Kind::kI64)
      .def(
          "split",
          [](Communicator& c, std::int32_t color, std::int32_t key) {
            py::gil_scoped_release release;
            return c.split(color, key);
          },
          py::arg("color"), py::arg("key"))
      .def(
          "broadcast",
          [](Communicator& c, int root, py::object value, Kind kind) {
            std::optional<Value> v;
            if (c.rank() == root) v = from_py(value, kind);
            Value out;
            {
              py::gil_scoped_release release;
              out = c.broadcast(root, v, kind);
            }
            return to_py(out);
          },
          py::arg("root"), py::arg("value") = py::none(), py::arg("kind") = Kind::kI64)
      .def(
          "all_reduce",
          [](Communicator& c, py::object value, py::function fn, Kind kind) {
            const Value v = from_py(value, kind);
            PyObject* raw = fn.ptr();
            Value out;
            {
              py::gil_scoped_release release;
              out = c.all_reduce(v, [raw, kind](const Value& a, const Value& b) {
                return with_gil([&] { return from_py(py::handle(raw)(to_py(a), to_py(b)), kind); });
              });
            }
            return to_py(out);
          },
          py::arg("value"), py::arg("fn"), py::arg("kind") = Kind::kI64);

  py::class_<LocalContext>(m, "LocalContext")
      .def(py::init<>())
      .def("run", &LocalContext::run, py::arg("fn"), py::arg("n"), py::arg("routing") = RoutingMode::kP2P,
           py::arg("parameter") = py::none(), py::arg("parameter_kind") = py::none(),
           py::arg("result_kind") = py::none(),
           "Run fn(comm) on n local ranks and return the per-rank results.");

  m.def("example_names", &examples::names);
  m.def("run_example", &run_example_py, py::arg("name"), py::arg("n"), py::arg("routing") = RoutingMode::kP2P,
        py::arg("mode") = "local", py::arg("workers") = 3, py::arg("parameter") = py::none(),
        "Run a bundled example, locally or on an in-process loopback cluster. Returns (results, summary).");
}
