"""A small self-contained shop site used as the simulation target.

Serves search, product, cart, and order-confirmation pages over plain
HTTP with per-visitor carts (cookie ``sid``). The markup is deliberately
cluttered with wrappers and presentational attributes so the recipe
parser has something real to simplify.
"""

import re
import threading
from dataclasses import dataclass
from decimal import Decimal
from http import cookies
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, quote, urlsplit


@dataclass(frozen=True)
class Product:
    id: str
    title: str
    price: Decimal
    rating: str
    reviews: int
    delivery: str
    colors: tuple
    sizes: tuple
    tags: str


CATALOG = (
    Product(
        id="p1",
        title="Jackets For Women Womens Hooded Fleece Line Coats Parkas "
              "Faux Fur Jackets with Pockets",
        price=Decimal("39.99"),
        rating="4.2 out of 5 stars",
        reviews=1247,
        delivery="FREE delivery Thu, Aug 28",
        colors=("Navy", "Black", "Red"),
        sizes=("Small", "Medium", "Large"),
        tags="woman jacket coat hooded fleece parka winter warm",
    ),
    Product(
        id="p2",
        title="1966 Ford F-100 Clear Body: Slash, Slash 4x4",
        price=Decimal("43.99"),
        rating="4.3 out of 5 stars",
        reviews=103,
        delivery="FREE delivery Mon, Oct 14",
        colors=("Clear",),
        sizes=(),
        tags="rc truck body hobby car",
    ),
    Product(
        id="p3",
        title="Mens Lightweight Running Jacket Windbreaker Water Resistant",
        price=Decimal("27.50"),
        rating="4.0 out of 5 stars",
        reviews=312,
        delivery="FREE delivery Fri, Aug 29",
        colors=("Black", "Olive"),
        sizes=("Medium", "Large", "XL"),
        tags="men jacket running windbreaker sport",
    ),
    Product(
        id="p4",
        title="Womens Waterproof Winter Parka with Removable Hood",
        price=Decimal("89.00"),
        rating="4.6 out of 5 stars",
        reviews=874,
        delivery="FREE delivery Tue, Sep 2",
        colors=("Navy", "Forest"),
        sizes=("Small", "Medium", "Large"),
        tags="woman parka winter waterproof jacket coat",
    ),
    Product(
        id="p5",
        title="Kids Puffer Jacket Lightweight Packable",
        price=Decimal("24.99"),
        rating="4.4 out of 5 stars",
        reviews=456,
        delivery="FREE delivery Wed, Sep 3",
        colors=("Blue", "Pink"),
        sizes=("XS", "Small"),
        tags="kids jacket puffer school",
    ),
)

PRODUCTS = {p.id: p for p in CATALOG}

_STYLE = """
body{font-family:Arial,Helvetica,sans-serif;margin:0;color:#111}
.site-header{display:flex;gap:16px;padding:12px 20px;background:#232f3e;color:#fff}
.result-card-outer{padding:8px;border-bottom:1px solid #ddd}
.stars{display:inline-block;width:80px;height:16px;background:url(/static/stars.png)}
.option.selected{outline:2px solid #e77600}
.add-to-cart{background:#ffd814;border-radius:20px;padding:8px 14px;border:0}
"""


def _stars(product):
    return (
        f'<i class="stars rating-sprite" aria-hidden="false">'
        f'<span class="stars-alt">{product.rating}</span></i>'
    )


def _header(cart_count, query=""):
    return f"""
<header class="site-header" role="banner">
  <a class="logo" href="/">Fleecely</a>
  <form class="search-form" action="/search" method="get" role="search">
    <input type="text" class="search-input" name="q" value="{escape(query)}"
           placeholder="Search Fleecely">
    <button type="submit" class="search-submit">Search</button>
  </form>
  <a class="cart-link" href="/cart">Cart ({cart_count})</a>
</header>
"""


def escape(text):
    return (str(text).replace("&", "&amp;").replace("<", "&lt;")
            .replace(">", "&gt;").replace('"', "&quot;"))


def _page(title, header, body):
    return f"""<!DOCTYPE html>
<html lang="en">
<head><meta charset="utf-8"><title>{escape(title)}</title>
<style>{_STYLE}</style></head>
<body>
{header}
<main class="page-main">
{body}
</main>
<footer class="site-footer"><span>Fleecely — a demo storefront</span></footer>
</body>
</html>"""


def _card(product):
    return f"""
<div class="result-card-outer sg-col">
  <div class="result-card" data-id="{product.id}">
    <div class="image-wrap"><a href="/product/{product.id}">
      <img class="thumb" src="/static/{product.id}.jpg" alt="{escape(product.title)}"></a></div>
    <div class="title-wrap">
      <a class="product-link" href="/product/{product.id}">
        <span class="product-title">{escape(product.title)}</span>
      </a>
    </div>
    <div class="review-row">
      {_stars(product)}
      <span class="review-count">{product.reviews}</span>
    </div>
    <div class="price-row"><span class="price">${product.price}</span></div>
    <div class="delivery-note">{escape(product.delivery)}</div>
  </div>
</div>"""


def _search_rank(query):
    tokens = [t for t in re.findall(r"[a-z0-9]+", query.lower()) if len(t) > 1]
    if not tokens:
        return list(CATALOG)
    scored = []
    for product in CATALOG:
        haystack = f"{product.title} {product.tags}".lower()
        hits = sum(1 for t in tokens if t in haystack)
        if hits:
            scored.append((hits, product))
    scored.sort(key=lambda pair: -pair[0])
    return [p for _, p in scored] or list(CATALOG)


def _option_links(product, kind, chosen_color, chosen_size):
    values = product.colors if kind == "color" else product.sizes
    chosen = chosen_color if kind == "color" else chosen_size
    links = []
    for value in values:
        color = value if kind == "color" else chosen_color
        size = value if kind == "size" else chosen_size
        href = f"/product/{product.id}?color={quote(color)}&size={quote(size)}"
        selected = " selected" if value == chosen else ""
        links.append(
            f'<a class="option {kind}{selected}" href="{href}">{escape(value)}</a>'
        )
    return "\n      ".join(links)


class ShopHandler(BaseHTTPRequestHandler):
    server_version = "FleecelyFixture/1.0"

    def log_message(self, fmt, *args):  # silence request logging in tests
        pass

    # -- plumbing ---------------------------------------------------------

    def _session_id(self):
        header = self.headers.get("Cookie", "")
        jar = cookies.SimpleCookie()
        jar.load(header)
        if "sid" in jar:
            return jar["sid"].value, False
        with self.server.lock:
            self.server.sid_counter += 1
            return f"s{self.server.sid_counter:06d}", True

    def _cart(self, sid):
        with self.server.lock:
            return self.server.carts.setdefault(sid, [])

    def _respond(self, body, status=200, location=None, new_sid=None):
        payload = body.encode("utf-8")
        self.send_response(status)
        if location:
            self.send_header("Location", location)
        self.send_header("Content-Type", "text/html; charset=utf-8")
        self.send_header("Content-Length", str(len(payload)))
        if new_sid:
            self.send_header("Set-Cookie", f"sid={new_sid}; Path=/")
        self.end_headers()
        if self.command != "HEAD":
            self.wfile.write(payload)

    # -- routes -----------------------------------------------------------

    def do_GET(self):
        sid, fresh = self._session_id()
        parts = urlsplit(self.path)
        query = parse_qs(parts.query)
        cart = self._cart(sid)
        header = _header(len(cart))
        route = parts.path

        if route == "/":
            body = "<h1 class=\"page-title\">Welcome to Fleecely</h1>\n"
            body += '<div class="featured-band">'
            body += "".join(
                f'<div class="featured-card"><a href="/product/{p.id}">'
                f"{escape(p.title)}</a></div>" for p in CATALOG[:3]
            )
            body += "</div>"
            page = _page("Fleecely — Everyday Outfitters", header, body)
        elif route == "/search":
            q = query.get("q", [""])[0]
            results = _search_rank(q)
            header = _header(len(cart), q)
            body = f"<h1 class=\"page-title\">Search results for: '{escape(q)}'</h1>\n"
            body += '<div class="search-results sg-row">'
            body += "".join(_card(p) for p in results)
            body += "</div>"
            page = _page(f"Fleecely : {q}", header, body)
        elif route.startswith("/product/"):
            product = PRODUCTS.get(route.split("/")[2])
            if product is None:
                self._respond("<h1>Not found</h1>", status=404)
                return
            color = query.get("color", [""])[0]
            size = query.get("size", [""])[0]
            page = _page(product.title, header,
                         self._product_body(product, color, size))
        elif route == "/cart":
            page = _page("Your Cart", header, self._cart_body(cart))
        elif route == "/order/confirmation":
            page = _page("Order Confirmation", header,
                         self._confirmation_body(cart))
        elif route.startswith("/static/"):
            self._respond("", status=404)
            return
        else:
            self._respond("<h1>Not found</h1>", status=404)
            return
        self._respond(page, new_sid=sid if fresh else None)

    def do_POST(self):
        sid, fresh = self._session_id()
        length = int(self.headers.get("Content-Length", 0))
        form = parse_qs(self.rfile.read(length).decode("utf-8"))
        route = urlsplit(self.path).path
        if route == "/cart/add":
            product = PRODUCTS.get(form.get("id", [""])[0])
            if product is None:
                self._respond("<h1>Unknown product</h1>", status=400)
                return
            item = {
                "id": product.id,
                "color": form.get("color", [""])[0],
                "size": form.get("size", [""])[0],
            }
            self._cart(sid).append(item)
            self._respond("", status=303, location="/order/confirmation",
                          new_sid=sid if fresh else None)
            return
        self._respond("<h1>Not found</h1>", status=404)

    # -- page bodies --------------------------------------------------------

    def _product_body(self, product, color, size):
        chosen = ""
        if color:
            chosen += f'<span class="choice">Selected color: {escape(color)}</span>\n    '
        if size:
            chosen += f'<span class="choice">Selected size: {escape(size)}</span>\n    '
        sizes_block = ""
        if product.sizes:
            sizes_block = f"""
  <div class="option-group size-options">
    <h3 class="option-heading">Size</h3>
    {_option_links(product, "size", color, size)}
  </div>"""
        return f"""
<div class="product-detail" data-id="{product.id}">
  <div class="gallery-wrap"><img class="hero" src="/static/{product.id}-large.jpg"
       alt="{escape(product.title)}"></div>
  <h1 class="product-title">{escape(product.title)}</h1>
  <div class="review-row">
    {_stars(product)}
    <span class="review-count">{product.reviews}</span>
  </div>
  <div class="price-row"><span class="price">${product.price}</span></div>
  <div class="option-group color-options">
    <h3 class="option-heading">Color</h3>
    {chosen}{_option_links(product, "color", color, size)}
  </div>{sizes_block}
  <div class="shipping-options">
    <h3 class="option-heading">Shipping</h3>
    <div class="ship-option">
      <input type="radio" name="shipping" value="standard" checked><label>Standard Shipping</label>
    </div>
    <div class="ship-option">
      <input type="radio" name="shipping" value="express"><label>Express Shipping</label>
    </div>
  </div>
  <form class="add-form" action="/cart/add" method="post">
    <input type="hidden" name="id" value="{product.id}">
    <input type="hidden" name="color" value="{escape(color)}">
    <input type="hidden" name="size" value="{escape(size)}">
    <button type="submit" class="add-to-cart">Add to Cart</button>
  </form>
</div>"""

    def _lines(self, cart, line_class, name_class, price_class):
        rows, total = [], Decimal("0")
        for item in cart:
            product = PRODUCTS[item["id"]]
            label = product.title
            extras = ", ".join(v for v in (item["color"], item["size"]) if v)
            if extras:
                label = f"{label} ({extras})"
            total += product.price
            rows.append(
                f'<div class="{line_class}">'
                f'<span class="{name_class}">{escape(label)}</span>'
                f'<span class="{price_class}">${product.price}</span></div>'
            )
        return "\n".join(rows), total

    def _cart_body(self, cart):
        rows, total = self._lines(cart, "cart-line", "item-name", "item-price")
        return f"""
<div class="cart-page">
  <h1 class="page-title">Your Cart</h1>
  <div class="cart-lines">{rows or '<p class="empty">Your cart is empty.</p>'}</div>
  <div class="cart-total">Subtotal: <span class="total-amount">${total}</span></div>
</div>"""

    def _confirmation_body(self, cart):
        rows, total = self._lines(cart, "order-line", "item-name", "item-price")
        return f"""
<div class="order-confirmation" id="order-confirmation">
  <h1 class="confirm-title">Order Confirmation</h1>
  <p class="thanks">Thank you! Your order has been placed.</p>
  <div class="order-lines">
{rows}
  </div>
  <div class="order-total">Total: <span class="total-amount">${total}</span></div>
</div>"""


class ShopServer:
    """Threaded HTTP server wrapper with a lifecycle suitable for tests."""

    def __init__(self, host="127.0.0.1", port=0):
        self.httpd = ThreadingHTTPServer((host, port), ShopHandler)
        self.httpd.carts = {}
        self.httpd.sid_counter = 0
        self.httpd.lock = threading.Lock()
        self._thread = None

    @property
    def url(self):
        host, port = self.httpd.server_address[:2]
        return f"http://{host}:{port}"

    def start(self):
        self._thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self):
        self.httpd.shutdown()
        self.httpd.server_close()
        if self._thread:
            self._thread.join(timeout=5)

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()
