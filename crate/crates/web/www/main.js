import init, { airtime, bounds_curve, monte_carlo } from "./pkg/lorapdr_web.js";

const num = (form, name) => Number(form.querySelector(`[name=${name}]`).value);
const checked = (form, name) => form.querySelector(`[name=${name}]`).checked;

function show(id, fn) {
  const out = document.getElementById(id);
  try {
    out.textContent = fn();
    out.classList.remove("error");
  } catch (e) {
    out.textContent = String(e.message ?? e);
    out.classList.add("error");
  }
}

function updateAirtime() {
  const f = document.getElementById("airtime");
  show("airtime-out", () => {
    const [ts, symbols, ldro, toa] = airtime(
      num(f, "sf"), num(f, "bw"), num(f, "payload"), num(f, "cr"),
      num(f, "preamble"), checked(f, "header"), checked(f, "crc"));
    return `symbol time ${(ts * 1e3).toFixed(3)} ms, ${symbols} payload symbols, ` +
      `LDRO ${ldro ? "on" : "off"}, time on air ${(toa * 1e3).toFixed(3)} ms`;
  });
}

function draw(rows, total) {
  const canvas = document.getElementById("plot");
  const g = canvas.getContext("2d");
  const w = canvas.width, h = canvas.height, pad = 36;
  g.clearRect(0, 0, w, h);
  const x = (n) => pad + (w - 2 * pad) * n / total;
  const y = (p) => h - pad - (h - 2 * pad) * p;
  g.strokeStyle = "#999";
  g.strokeRect(pad, pad, w - 2 * pad, h - 2 * pad);
  g.fillStyle = "#333";
  g.fillText("0", pad - 4, h - pad + 14);
  g.fillText(String(total), w - pad - 20, h - pad + 14);
  g.fillText("1", pad - 14, y(1) + 4);
  g.fillText("0", pad - 14, y(0) + 4);
  g.fillText("devices on SF8", w / 2 - 30, h - 8);
  for (const [col, k] of [["#c33", 1], ["#36c", 2]]) {
    g.strokeStyle = col;
    g.beginPath();
    for (let i = 0; i < rows.length; i += 3) {
      const px = x(rows[i]), py = y(rows[i + k]);
      i === 0 ? g.moveTo(px, py) : g.lineTo(px, py);
    }
    g.stroke();
  }
}

function updateCurve() {
  const f = document.getElementById("curve");
  show("curve-out", () => {
    const total = num(f, "total");
    const step = Math.max(1, Math.floor(total / 400));
    const rows = bounds_curve(total, num(f, "period"), num(f, "t7"), num(f, "t8"), step);
    draw(rows, total);
    let best = 0;
    for (let i = 3; i < rows.length; i += 3) if (rows[i + 1] > rows[best + 1]) best = i;
    return `lower bound (red) peaks at ${rows[best]} devices on SF8: ` +
      `${rows[best + 1].toFixed(4)} (all SF7: ${rows[1].toFixed(4)}); upper bound in blue`;
  });
}

function runMonteCarlo() {
  const f = document.getElementById("mc");
  show("mc-out", () => {
    const [pdr, exact, lower, upper, sent, se] = monte_carlo(
      num(f, "devices"), num(f, "period"), num(f, "airtime"), num(f, "periods"), num(f, "seed"));
    return `PDR ${pdr.toFixed(4)} over ${sent} packets (z = ${((pdr - exact) / se).toFixed(2)})\n` +
      `periodic law ${exact.toFixed(4)}, bounds [${lower.toFixed(4)}, ${upper.toFixed(4)}]`;
  });
}

await init();
document.getElementById("airtime").addEventListener("input", updateAirtime);
document.getElementById("curve").addEventListener("input", updateCurve);
document.getElementById("run").addEventListener("click", runMonteCarlo);
updateAirtime();
updateCurve();
runMonteCarlo();
