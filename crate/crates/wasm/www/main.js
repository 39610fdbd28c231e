import init, {
  operator_profile,
  flow_curves,
  exponent_table,
  phase_lines,
  smoothing_cells,
} from "./pkg/ffde_wasm.js";

const COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"];

function form(section) {
  const f = document.querySelector(`#${section} form`);
  const get = (name) => f.elements[name].value;
  return { f, get, num: (name) => Number(get(name)) };
}

function output(section, text, isError = false) {
  const el = document.querySelector(`#${section} .out`);
  el.classList.toggle("err", isError);
  el.textContent = text;
  return el;
}

function fmt(x) {
  if (x === null || x === undefined || Number.isNaN(x)) return "–";
  if (x === Infinity) return "∞";
  if (typeof x === "object" && "kind" in x) return x.kind === "finite" ? fmt(x.value) : x.kind;
  const a = Math.abs(x);
  return a !== 0 && (a < 1e-3 || a >= 1e4) ? x.toExponential(3) : x.toPrecision(4);
}

/** Draw line series and optional markers on a canvas with simple axes. */
function plot(canvas, series, opts = {}) {
  const dpr = window.devicePixelRatio || 1;
  const w = canvas.clientWidth, h = canvas.clientHeight;
  canvas.width = w * dpr;
  canvas.height = h * dpr;
  const ctx = canvas.getContext("2d");
  ctx.scale(dpr, dpr);
  ctx.clearRect(0, 0, w, h);
  const pad = { l: 64, r: 16, t: 12, b: 36 };
  const fy = opts.logy ? (v) => (v > 0 ? Math.log10(v) : NaN) : (v) => v;
  const xs = [], ys = [];
  for (const s of series) {
    s.x.forEach((x, i) => {
      const y = fy(s.y[i]);
      if (Number.isFinite(x) && Number.isFinite(y)) { xs.push(x); ys.push(y); }
    });
  }
  for (const p of opts.points || []) { xs.push(p.x); ys.push(fy(p.y)); }
  if (!xs.length) return;
  let [x0, x1] = opts.xrange || [Math.min(...xs), Math.max(...xs)];
  let [y0, y1] = opts.yrange || [Math.min(...ys), Math.max(...ys)];
  if (x1 === x0) x1 = x0 + 1;
  if (y1 === y0) { y0 -= 0.5; y1 += 0.5; }
  const px = (x) => pad.l + ((x - x0) / (x1 - x0)) * (w - pad.l - pad.r);
  const py = (y) => h - pad.b - ((y - y0) / (y1 - y0)) * (h - pad.t - pad.b);

  ctx.strokeStyle = "#999";
  ctx.fillStyle = "#444";
  ctx.font = "11px system-ui";
  ctx.beginPath();
  ctx.moveTo(pad.l, pad.t);
  ctx.lineTo(pad.l, h - pad.b);
  ctx.lineTo(w - pad.r, h - pad.b);
  ctx.stroke();
  for (let k = 0; k <= 4; k++) {
    const x = x0 + ((x1 - x0) * k) / 4;
    const y = y0 + ((y1 - y0) * k) / 4;
    ctx.fillText(fmt(x), px(x) - 12, h - pad.b + 14);
    ctx.fillText(opts.logy ? `1e${y.toFixed(1)}` : fmt(y), 4, py(y) + 4);
  }
  if (opts.xlabel) ctx.fillText(opts.xlabel, w - pad.r - 60, h - 6);
  if (opts.ylabel) ctx.fillText(opts.ylabel, pad.l + 6, pad.t + 10);

  series.forEach((s, k) => {
    ctx.strokeStyle = s.color || COLORS[k % COLORS.length];
    ctx.setLineDash(s.dash || []);
    ctx.lineWidth = 1.5;
    ctx.beginPath();
    let pen = false;
    s.x.forEach((x, i) => {
      const y = fy(s.y[i]);
      if (!Number.isFinite(y)) { pen = false; return; }
      pen ? ctx.lineTo(px(x), py(y)) : ctx.moveTo(px(x), py(y));
      pen = true;
    });
    ctx.stroke();
    if (s.label) {
      ctx.fillStyle = ctx.strokeStyle;
      ctx.fillText(s.label, w - pad.r - 110, pad.t + 14 * (k + 1));
    }
  });
  ctx.setLineDash([]);
  for (const p of opts.points || []) {
    ctx.fillStyle = p.color;
    ctx.strokeStyle = p.color;
    const X = px(p.x), Y = py(fy(p.y));
    if (p.filled) ctx.fillRect(X - 4, Y - 4, 8, 8);
    else ctx.strokeRect(X - 4, Y - 4, 8, 8);
  }
}

function guarded(section, fn) {
  return (ev) => {
    ev.preventDefault();
    output(section, "working…");
    // Let the status paint before the synchronous computation.
    setTimeout(() => {
      try { fn(); } catch (e) { output(section, String(e), true); }
    }, 10);
  };
}

function runOperator() {
  const { get, num } = form("operator");
  const r = JSON.parse(operator_profile(get("kind"), num("s"), num("n")));
  plot(document.querySelector("#operator canvas"), [{ x: r.x, y: r.phi1, label: "Φ₁ / max" }], { xlabel: "x" });
  output("operator",
    `λ₁ = ${fmt(r.lambda1)}   γ = ${fmt(r.gamma)}   γ̂ = ${fmt(r.gamma_hat)}` +
    `   M-matrix: ${r.offdiag_nonpositive}\n` +
    `first eigenvalues: ${r.eigenvalues_head.map(fmt).join(", ")}`);
}

function runFlow() {
  const { get, num } = form("flow");
  const m = num("m");
  const r = JSON.parse(flow_curves(get("kind"), num("s"), num("n"), m, get("datum"), num("t_max")));
  const logy = get("scale") === "log";
  const keys = [["linf", "‖u‖∞"], ["l2", "‖u‖₂"], ["l1", "‖u‖₁"], ["l1phi", "‖u‖ L¹(Φ₁)"], ["hstar", "‖u‖ H*"], ["rate", "‖u‖^(1−m) L^(1+m)"]];
  plot(document.querySelector("#flow canvas"),
    keys.map(([k, label], i) => ({ x: r.t, y: r[k], label, dash: k === "rate" ? [5, 4] : [] , color: COLORS[i] })),
    { logy, xlabel: "t" });
  output("flow",
    `steps = ${r.steps}   T (threshold) = ${fmt(r.t_hat)}   T (fit) = ${fmt(r.t_fit)}\n` +
    `Q[u₀] = ${fmt(r.q[0])}   predicted initial slope of the dashed curve: ${fmt(-(1 - m) * r.q[0])}`);
}

function exponentRows(t) {
  const rows = [
    ["m_c", t.m_c], ["p_c", t.p_c], ["m_s", t.m_s], ["m_c,γ", t.m_c_gamma],
    ["p_c,γ", t.p_c_gamma], ["2*", t.two_star], ["ϑ_(1+m)", t.theta_1pm],
  ];
  return `<table><tr>${rows.map(([k]) => `<th>${k}</th>`).join("")}<th>regime</th></tr>` +
    `<tr>${rows.map(([, v]) => `<td>${fmt(v)}</td>`).join("")}<td>${t.regime}</td></tr></table>` +
    (t.outside_hypotheses ? "<p>N ≤ 2s: values lie outside the stated hypotheses.</p>" : "");
}

let lastCells = [];

function drawPhase() {
  const { num } = form("exponents");
  const dim = num("dim"), s = num("s"), gamma = num("gamma"), m = num("m");
  const lines = JSON.parse(phase_lines(dim, s, gamma, 200));
  const cap = 6;
  const clip = (v) => (v === null || v > cap ? NaN : v);
  const series = [{ x: lines.m, y: lines.p_c.map(clip), label: "p_c(m)", color: "#2ca02c" }];
  if (lines.p_c_gamma.some((v) => v !== null)) {
    series.push({ x: lines.m, y: lines.p_c_gamma.map(clip), label: "p_c,γ(m)", color: "#9467bd", dash: [4, 3] });
  }
  series.push({ x: [lines.m_c, lines.m_c], y: [0, cap], label: "m_c", color: "#999", dash: [2, 3] });
  series.push({ x: [m, m], y: [0, cap], label: "m", color: "#ff7f0e", dash: [1, 2] });
  const points = lastCells.map((c) => ({
    x: c.m, y: c.p,
    color: c.bounded === c.predicted_bounded ? "#1f77b4" : "#d62728",
    filled: c.bounded,
  }));
  plot(document.querySelector("#exponents canvas"), series,
    { points, xrange: [0, 1], yrange: [0, cap], xlabel: "m", ylabel: "p" });
}

function runExponents() {
  const { num } = form("exponents");
  const t = JSON.parse(exponent_table(num("dim"), num("s"), num("m"), num("gamma")));
  drawPhase();
  output("exponents", "").innerHTML = exponentRows(t) +
    "<p>Smoothing from L^p holds above the green curve. Squares: filled = κ̂ stable under refinement; " +
    "red = disagrees with the prediction.</p>";
}

function runCells() {
  const { num } = form("exponents");
  const ms = new Float64Array([0.2, 0.35, 0.5, 0.65, 0.8]);
  const ps = new Float64Array([1, 1.5, 2, 3, 4]);
  lastCells = JSON.parse(smoothing_cells("rfl", num("s"), ms, ps, new Uint32Array([32, 64])));
  drawPhase();
  const agree = lastCells.filter((c) => c.bounded === c.predicted_bounded).length;
  output("exponents", `${agree}/${lastCells.length} cells agree with p > p_c(m)`);
}

await init();
document.querySelector("#operator form").addEventListener("submit", guarded("operator", runOperator));
document.querySelector("#flow form").addEventListener("submit", guarded("flow", runFlow));
document.querySelector("#exponents form").addEventListener("submit", guarded("exponents", runExponents));
document.querySelector("#exponents button[name=cells]").addEventListener("click", guarded("exponents", runCells));
runOperator();
runFlow();
runExponents();
