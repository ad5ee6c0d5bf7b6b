/**
 * Intervention rendering: every detected slot is emptied first, then
 * filled with a partner ad fetched for the slot's geometry. A slot
 * whose replacement cannot be fetched or whose image fails to load
 * collapses. There is no path on which the original creative stays up.
 */
import type { AdSlot } from './detect';
import type { Geometry, SwapResponse } from './wire';

export type SwapFetcher = (w: number, h: number) => Promise<SwapResponse>;
export type ImageLoader = (url: string) => Promise<boolean>;

export interface RenderedSlot {
  slot: AdSlot;
  state: 'swapped' | 'collapsed';
  swapDeliveryId?: string;
  // what actually renders in the slot
  imageUrl?: string;
  text?: string;
  targetUrl?: string;
  rendered?: Geometry;
}

/** Scale-to-fit preserving aspect; exact geometry passes through. */
export function fitGeometry(natural: Geometry, slot: Geometry): Geometry {
  if (natural.w === slot.w && natural.h === slot.h) return { ...slot };
  if (natural.w <= 0 || natural.h <= 0) return { ...slot };
  const scale = Math.min(slot.w / natural.w, slot.h / natural.h);
  return { w: natural.w * scale, h: natural.h * scale };
}

export async function renderSwap(
  slot: AdSlot,
  fetchSwap: SwapFetcher,
  loadImage: ImageLoader,
): Promise<RenderedSlot> {
  let delivery: SwapResponse;
  try {
    delivery = await fetchSwap(slot.geometry.w, slot.geometry.h);
  } catch {
    return { slot, state: 'collapsed' };
  }
  const payload = delivery.payload;
  if (payload.payload_kind === 'image') {
    const url = payload.image_url ?? payload.stored_image_ref;
    if (!url || !(await loadImage(url))) {
      return { slot, state: 'collapsed', swapDeliveryId: delivery.swap_delivery_id };
    }
    return {
      slot,
      state: 'swapped',
      swapDeliveryId: delivery.swap_delivery_id,
      imageUrl: url,
      targetUrl: payload.target_url,
      rendered: fitGeometry(payload.natural_geometry, slot.geometry),
    };
  }
  return {
    slot,
    state: 'swapped',
    swapDeliveryId: delivery.swap_delivery_id,
    text: payload.text ?? '',
    targetUrl: payload.target_url,
    rendered: { ...slot.geometry },
  };
}

export async function interventionPass(
  slots: AdSlot[],
  fetchSwap: SwapFetcher,
  loadImage: ImageLoader,
): Promise<RenderedSlot[]> {
  const out: RenderedSlot[] = [];
  for (const slot of slots) {
    out.push(await renderSwap(slot, fetchSwap, loadImage));
  }
  return out;
}

/**
 * The page's renderable content after an intervention pass: original
 * ad elements are gone, swapped slots carry replacement payloads,
 * collapsed slots render nothing.
 */
export function renderedContent(rendered: RenderedSlot[]): {
  images: string[];
  texts: string[];
  links: string[];
} {
  const images: string[] = [];
  const texts: string[] = [];
  const links: string[] = [];
  for (const r of rendered) {
    if (r.state !== 'swapped') continue;
    if (r.imageUrl) images.push(r.imageUrl);
    if (r.text) texts.push(r.text);
    if (r.targetUrl) links.push(r.targetUrl);
  }
  return { images, texts, links };
}
