import init, { sphereSpectrum, optimizeSphere, steklovDisk } from "./pkg/sdl_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function report(id, f) {
  const out = $(id);
  out.classList.remove("err");
  out.textContent = "running...";
  // let the browser paint before the solver blocks the thread
  setTimeout(() => {
    try {
      const t0 = performance.now();
      const text = f();
      out.textContent = `${text}\n(${((performance.now() - t0) / 1000).toFixed(2)} s)`;
    } catch (e) {
      out.classList.add("err");
      out.textContent = String(e);
    }
  }, 10);
}

function color(t) {
  // blue to red
  const c = Math.max(0, Math.min(1, t));
  return `rgb(${Math.round(40 + 215 * c)},${Math.round(80 + 60 * (1 - Math.abs(2 * c - 1)))},${Math.round(255 - 215 * c)})`;
}

function plotTrace(canvas, values, target, label) {
  const g = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  g.clearRect(0, 0, w, h);
  const lo = Math.min(...values, target) * 0.98;
  const hi = Math.max(...values, target) * 1.01;
  const x = (i) => 40 + (i / Math.max(1, values.length - 1)) * (w - 60);
  const y = (v) => h - 30 - ((v - lo) / (hi - lo)) * (h - 50);
  g.strokeStyle = "#999";
  g.setLineDash([4, 4]);
  g.beginPath();
  g.moveTo(40, y(target));
  g.lineTo(w - 20, y(target));
  g.stroke();
  g.setLineDash([]);
  g.fillStyle = "#555";
  g.fillText(label, w - 60, y(target) - 4);
  g.fillText(hi.toFixed(2), 2, 20);
  g.fillText(lo.toFixed(2), 2, h - 30);
  g.fillText("iteration", w / 2 - 20, h - 8);
  g.strokeStyle = "#c33";
  g.beginPath();
  values.forEach((v, i) => (i ? g.lineTo(x(i), y(v)) : g.moveTo(x(i), y(v))));
  g.stroke();
}

let sphere = null;

function drawSphere() {
  if (!sphere) return;
  const canvas = $("sph-view");
  const g = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  g.clearRect(0, 0, w, h);
  const p = sphere.positions;
  const t = sphere.triangles;
  const field = $("sph-show-initial").checked ? sphere.initial : sphere.density;
  const lo = Math.min(...sphere.initial, ...sphere.density);
  const hi = Math.max(...sphere.initial, ...sphere.density);
  // tilt so both poles of the skewed start are visible
  const a = 0.45, ca = Math.cos(a), sa = Math.sin(a);
  const view = (i) => {
    const [x, y, z] = [p[3 * i], p[3 * i + 1], p[3 * i + 2]];
    return [x, ca * y - sa * z, sa * y + ca * z];
  };
  const faces = [];
  for (let f = 0; f < t.length; f += 3) {
    const v = [view(t[f]), view(t[f + 1]), view(t[f + 2])];
    const depth = v[0][1] + v[1][1] + v[2][1];
    if (depth > 0) continue;
    const val = (field[t[f]] + field[t[f + 1]] + field[t[f + 2]]) / 3;
    faces.push({ v, depth, val });
  }
  faces.sort((a, b) => b.depth - a.depth);
  const s = 0.45 * Math.min(w, h);
  for (const { v, val } of faces) {
    g.fillStyle = color((val - lo) / (hi - lo || 1));
    g.beginPath();
    g.moveTo(w / 2 + s * v[0][0], h / 2 - s * v[0][2]);
    g.lineTo(w / 2 + s * v[1][0], h / 2 - s * v[1][2]);
    g.lineTo(w / 2 + s * v[2][0], h / 2 - s * v[2][2]);
    g.closePath();
    g.fill();
    g.strokeStyle = g.fillStyle;
    g.stroke();
  }
}

function drawDisk(run) {
  const canvas = $("disk-view");
  const g = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  g.clearRect(0, 0, w, h);
  const r0 = 0.25 * Math.min(w, h);
  const hi = Math.max(...run.initial, ...run.density);
  const scale = (0.2 * Math.min(w, h)) / hi;
  g.strokeStyle = "#bbb";
  g.beginPath();
  g.arc(w / 2, h / 2, r0, 0, 2 * Math.PI);
  g.stroke();
  const curve = (vals, style) => {
    g.strokeStyle = style;
    g.beginPath();
    const n = vals.length;
    for (let k = 0; k <= n; k++) {
      const i = k % n;
      const r = r0 + scale * vals[i];
      const [px, py] = [w / 2 + r * Math.cos(run.angles[i]), h / 2 - r * Math.sin(run.angles[i])];
      k ? g.lineTo(px, py) : g.moveTo(px, py);
    }
    g.stroke();
  };
  curve(run.initial, "#88a");
  curve(run.density, "#c33");
  g.fillStyle = "#555";
  g.fillText("initial", 8, 16);
  g.fillStyle = "#c33";
  g.fillText("optimized", 8, 30);
}

$("spec-run").onclick = () =>
  report("spec-out", () => {
    const ev = sphereSpectrum(num("spec-sub"), num("spec-count"));
    return Array.from(ev, (l, k) => `${String(k).padStart(3)}  ${l.toFixed(8)}`).join("\n");
  });

$("sph-run").onclick = () =>
  report("sph-out", () => {
    if (sphere) sphere.free();
    sphere = optimizeSphere(num("sph-sub"), num("sph-skew"), num("sph-iters"));
    const tr = sphere.trace;
    drawSphere();
    plotTrace($("sph-trace"), tr, 8 * Math.PI, "8π");
    const last = tr[tr.length - 1];
    return `F1: ${tr[0].toFixed(5)} -> ${last.toFixed(5)}   F1/8π = ${(last / (8 * Math.PI)).toFixed(5)}   steps: ${tr.length - 1}`;
  });

$("sph-show-initial").onchange = drawSphere;

$("disk-run").onclick = () =>
  report("disk-out", () => {
    const run = steklovDisk(num("disk-res"), num("disk-skew"), num("disk-iters"));
    const tr = run.trace;
    drawDisk(run);
    plotTrace($("disk-trace"), tr, 2 * Math.PI, "2π");
    run.free();
    const last = tr[tr.length - 1];
    return `G1: ${tr[0].toFixed(5)} -> ${last.toFixed(5)}   G1/2π = ${(last / (2 * Math.PI)).toFixed(5)}   steps: ${tr.length - 1}`;
  });

init().then(
  () => ($("status").textContent = "ready"),
  (e) => {
    $("status").classList.add("err");
    $("status").textContent = `failed to load the wasm module: ${e}`;
  },
);
