import type { VesselDto, ZoneDto } from "./types.js";

const SVG_NS = "http://www.w3.org/2000/svg";
const VIEW_W = 800;
const VIEW_H = 600;
const PAD = 30;

interface Projection {
  x(lon: number): number;
  y(lat: number): number;
}

function fitProjection(zones: ZoneDto[], vessels: VesselDto[]): Projection {
  let minLat = Infinity, maxLat = -Infinity, minLon = Infinity, maxLon = -Infinity;
  const take = (lat: number, lon: number) => {
    if (lat < minLat) minLat = lat;
    if (lat > maxLat) maxLat = lat;
    if (lon < minLon) minLon = lon;
    if (lon > maxLon) maxLon = lon;
  };
  for (const z of zones) for (const [lat, lon] of z.vertices) take(lat, lon);
  for (const v of vessels) take(v.lat, v.lon);
  if (!isFinite(minLat)) { minLat = 0; maxLat = 1; minLon = 0; maxLon = 1; }
  // degenerate extents (single point) still need a nonzero scale
  const spanLat = Math.max(maxLat - minLat, 1e-6);
  const spanLon = Math.max(maxLon - minLon, 1e-6);
  const sx = (VIEW_W - 2 * PAD) / spanLon;
  const sy = (VIEW_H - 2 * PAD) / spanLat;
  return {
    x: (lon) => PAD + (lon - minLon) * sx,
    y: (lat) => VIEW_H - PAD - (lat - minLat) * sy, // north up
  };
}

function svgEl<K extends keyof SVGElementTagNameMap>(tag: K): SVGElementTagNameMap[K] {
  return document.createElementNS(SVG_NS, tag);
}

/**
 * SVG chart: zone polygons underneath, one marker per vessel on top.
 * Highlighting never invents vessels: the applied set is intersected with
 * what is actually on the map, and `highlighted()` reports exactly what is
 * drawn.
 */
export class Chart {
  private svg: SVGSVGElement;
  private zoneLayer: SVGGElement;
  private vesselLayer: SVGGElement;
  private project: Projection | null = null;
  private markers = new Map<number, SVGGElement>();
  private zoneShapes = new Map<string, SVGElement>();
  private highlightSet = new Set<number>();

  constructor(container: HTMLElement) {
    this.svg = svgEl("svg");
    this.svg.setAttribute("viewBox", `0 0 ${VIEW_W} ${VIEW_H}`);
    this.svg.setAttribute("class", "chart");
    this.zoneLayer = svgEl("g");
    this.zoneLayer.setAttribute("class", "zones");
    this.vesselLayer = svgEl("g");
    this.vesselLayer.setAttribute("class", "vessels");
    this.svg.appendChild(this.zoneLayer);
    this.svg.appendChild(this.vesselLayer);
    container.appendChild(this.svg);
  }

  setData(zones: ZoneDto[], vessels: VesselDto[]): void {
    this.project = fitProjection(zones, vessels);
    this.zoneLayer.replaceChildren();
    this.zoneShapes.clear();
    for (const zone of zones) this.addZone(zone);
    this.vesselLayer.replaceChildren();
    this.markers.clear();
    for (const vessel of vessels) this.addVessel(vessel);
    this.applyHighlights();
  }

  /** Reposition markers from a fresh poll; unknown vessels are added. */
  updateVessels(vessels: VesselDto[]): void {
    if (!this.project) return;
    for (const vessel of vessels) {
      const marker = this.markers.get(vessel.mmsi);
      if (marker) this.placeMarker(marker, vessel);
      else this.addVessel(vessel);
    }
    this.applyHighlights();
  }

  private addZone(zone: ZoneDto): void {
    const p = this.project!;
    let shape: SVGElement;
    if (zone.vertices.length === 1) {
      const [lat, lon] = zone.vertices[0];
      shape = svgEl("circle");
      shape.setAttribute("cx", String(p.x(lon)));
      shape.setAttribute("cy", String(p.y(lat)));
      shape.setAttribute("r", "4");
    } else {
      const points = zone.vertices
        .map(([lat, lon]) => `${p.x(lon)},${p.y(lat)}`)
        .join(" ");
      shape = svgEl("polygon");
      shape.setAttribute("points", points);
    }
    shape.setAttribute("class", "zone");
    shape.setAttribute("data-zone", zone.name);
    this.zoneLayer.appendChild(shape);
    this.zoneShapes.set(zone.name, shape);

    const label = svgEl("text");
    const [lat0, lon0] = zone.vertices[0];
    label.setAttribute("x", String(p.x(lon0) + 6));
    label.setAttribute("y", String(p.y(lat0) - 4));
    label.setAttribute("class", "zone-label");
    label.textContent = zone.name;
    this.zoneLayer.appendChild(label);
  }

  private addVessel(vessel: VesselDto): void {
    const marker = svgEl("g");
    marker.setAttribute("class", "vessel");
    marker.setAttribute("data-mmsi", String(vessel.mmsi));
    const dot = svgEl("circle");
    dot.setAttribute("r", "5");
    dot.setAttribute("class", "vessel-dot");
    const tick = svgEl("line"); // heading tick out of the dot
    tick.setAttribute("class", "vessel-heading");
    const label = svgEl("text");
    label.setAttribute("class", "vessel-label");
    label.textContent = vessel.ship_name;
    marker.appendChild(dot);
    marker.appendChild(tick);
    marker.appendChild(label);
    this.placeMarker(marker, vessel);
    this.vesselLayer.appendChild(marker);
    this.markers.set(vessel.mmsi, marker);
  }

  private placeMarker(marker: SVGGElement, vessel: VesselDto): void {
    const p = this.project!;
    const cx = p.x(vessel.lon);
    const cy = p.y(vessel.lat);
    const rad = ((vessel.heading - 90) * Math.PI) / 180; // 0 deg = north
    const dot = marker.children[0] as SVGElement;
    dot.setAttribute("cx", String(cx));
    dot.setAttribute("cy", String(cy));
    const tick = marker.children[1] as SVGElement;
    tick.setAttribute("x1", String(cx));
    tick.setAttribute("y1", String(cy));
    tick.setAttribute("x2", String(cx + 10 * Math.cos(rad)));
    tick.setAttribute("y2", String(cy + 10 * Math.sin(rad)));
    const label = marker.children[2] as SVGElement;
    label.setAttribute("x", String(cx + 7));
    label.setAttribute("y", String(cy + 3));
  }

  /** Replace the highlight set; anything not on the map is dropped. */
  setHighlights(mmsis: number[]): void {
    this.highlightSet = new Set(mmsis.filter((m) => this.markers.has(m)));
    this.applyHighlights();
  }

  clearHighlights(): void {
    this.setHighlights([]);
  }

  highlighted(): number[] {
    return [...this.highlightSet].sort((a, b) => a - b);
  }

  /** Zone shapes referenced by the last answer get an emphasis class. */
  emphasizeZones(names: string[]): void {
    const wanted = new Set(names);
    for (const [name, shape] of this.zoneShapes) {
      shape.setAttribute(
        "class",
        wanted.has(name) ? "zone zone-active" : "zone",
      );
    }
  }

  private applyHighlights(): void {
    for (const [mmsi, marker] of this.markers) {
      marker.setAttribute(
        "class",
        this.highlightSet.has(mmsi) ? "vessel vessel-highlight" : "vessel",
      );
    }
  }

  vesselCount(): number {
    return this.markers.size;
  }

  zoneCount(): number {
    return this.zoneShapes.size;
  }
}
