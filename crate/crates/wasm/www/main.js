import init, { strataInfo, tssScatter, compare, benchmarkNames } from "./pkg/tailstrat_wasm.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);
const colors = ["#1f77b4", "#2ca02c", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"];

function guard(out, f) {
  try {
    f();
  } catch (e) {
    out.textContent = String(e);
  }
}

function drawScatter(s) {
  const c = $("plot");
  const ctx = c.getContext("2d");
  const half = Math.max(...s.points.map((p) => Math.max(Math.abs(p.x), Math.abs(p.y))), 1) * 1.05;
  const scale = c.width / (2 * half);
  const px = (x) => c.width / 2 + x * scale;
  const py = (y) => c.height / 2 - y * scale;
  ctx.clearRect(0, 0, c.width, c.height);
  ctx.strokeStyle = "#aaa";
  for (const r of s.radii) {
    if (!isFinite(r)) continue;
    ctx.beginPath();
    ctx.arc(px(0), py(0), r * scale, 0, 2 * Math.PI);
    ctx.stroke();
  }
  for (const p of s.points) {
    ctx.fillStyle = p.failed ? "#d62728" : colors[(p.stratum - 1) % colors.length];
    ctx.fillRect(px(p.x) - 1.5, py(p.y) - 1.5, 3, 3);
  }
}

function fmt(s) {
  const cov = s.cov == null ? "n/a" : (100 * s.cov).toFixed(1) + "%";
  return `${s.estimator.padEnd(28)} mean ${s.mean.toExponential(3)}  CoV ${cov}`;
}

await init();
for (const name of benchmarkNames()) {
  $("bench").add(new Option(name, name));
}

$("strata").onclick = () =>
  guard($("strata-out"), () => {
    const s = JSON.parse(strataInfo(num("d"), num("r0"), num("p0"), num("m")));
    $("strata-out").textContent = JSON.stringify(s, null, 2);
  });

$("scatter").onclick = () =>
  guard($("scatter-info"), () => {
    const s = JSON.parse(tssScatter($("bench").value, num("p0"), num("m"), num("n"), num("seed")));
    const fails = s.points.filter((p) => p.failed).length;
    $("scatter-info").textContent = `β = ${s.beta.toFixed(4)}, ${fails} of ${s.points.length} samples fail`;
    drawScatter(s);
  });

$("compare").onclick = () =>
  guard($("compare-out"), () => {
    $("compare-out").textContent = "running...";
    const c = JSON.parse(
      compare($("bench").value, num("p0"), num("m"), num("n"), num("trials"), $("lhs").checked, num("seed"))
    );
    const ref = c.tss.reference_pf == null ? "" : `reference ${c.tss.reference_pf.toExponential(3)}\n`;
    $("compare-out").textContent = `${ref}${fmt(c.tss)}\n${fmt(c.mcs)}`;
  });
