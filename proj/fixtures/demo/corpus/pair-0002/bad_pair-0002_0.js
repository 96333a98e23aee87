el.innerHTML = location.hash.slice(1);